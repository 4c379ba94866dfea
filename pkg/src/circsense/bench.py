"""Benchmark sweeps and the fixed CSV schema shared by every command."""

import csv
import math
from dataclasses import astuple, dataclass

from .circulant import DENSE_CAP
from .errors import CircsenseError, DenseCapError
from .sensing import make_problem, protocol_sizes
from .solvers import SOLVERS, SolverConfig, analytic_footprint

BENCH_HEADER = (
    "algorithm", "n", "m", "k", "seed", "iterations", "setup_s", "total_s",
    "final_mse", "footprint_bytes", "iters_per_s", "status",
)


@dataclass
class BenchRow:
    algorithm: str
    n: int
    m: int
    k: int
    seed: int
    iterations: int
    setup_s: float
    total_s: float
    final_mse: float
    footprint_bytes: int
    iters_per_s: float
    status: str

    @classmethod
    def from_report(cls, report, n, m, k, seed, status=None):
        loop = report.total_seconds - report.setup_seconds
        ips = report.iterations / loop if loop > 0 else math.inf
        if status is None:
            status = "ok" if report.converged else "not_converged"
        return cls(
            report.algorithm, n, m, k, seed, report.iterations,
            report.setup_seconds, report.total_seconds, report.final_mse,
            report.footprint_bytes, ips, status,
        )

    @classmethod
    def empty(cls, algorithm, n, m, k, seed, status, footprint=0):
        nan = float("nan")
        return cls(algorithm, n, m, k, seed, 0, nan, nan, nan, footprint, nan, status)

    @classmethod
    def from_timing(cls, timing, seed=0):
        """Matvec timings: one 'iteration' is one product."""
        total = timing.mean_s * timing.repeats
        ips = timing.repeats / total if total > 0 else math.inf
        return cls(
            f"matvec-{timing.scheme}", timing.n, timing.n, 0, seed, timing.repeats,
            0.0, total, float("nan"), timing.fetch_total * 8, ips, "ok",
        )


def write_rows(path_or_file, rows):
    """Write BenchRows under the fixed header; accepts a path or an open file."""
    if hasattr(path_or_file, "write"):
        _write(path_or_file, rows)
    else:
        with open(path_or_file, "w", newline="") as fh:
            _write(fh, rows)


def _write(fh, rows):
    writer = csv.writer(fh)
    writer.writerow(BENCH_HEADER)
    for row in rows:
        writer.writerow(_fmt(v) for v in astuple(row))


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def read_rows(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != BENCH_HEADER:
            raise ValueError(f"unexpected CSV header {header}")
        rows = []
        for rec in reader:
            a, n, m, k, s, it, st, tt, mse_, fp, ips, status = rec
            rows.append(BenchRow(a, int(n), int(m), int(k), int(s), int(it), float(st),
                                 float(tt), float(mse_), int(fp), float(ips), status))
        return rows


def run_sweep(ns, solvers=("ista", "admm", "cadmm"), seeds=(0,), repeats=1,
              cfg=None, dense_cap=DENSE_CAP, m=None, k=None, progress=None):
    """Run every (n, solver, seed) combination; one BenchRow each.

    Timing columns keep the fastest of ``repeats`` runs.  Dense ADMM above
    ``dense_cap`` is recorded with status ``skipped``; solver errors are
    recorded in the status column and the sweep continues.
    """
    cfg = cfg or SolverConfig()
    rows = []
    for n in ns:
        dm, dk = protocol_sizes(n)
        mm = dm if m is None else m
        kk = dk if k is None else k
        for seed in seeds:
            problem = make_problem(n, mm, kk, seed)
            for name in solvers:
                fp = analytic_footprint(name, n, mm, cfg.scalar_width)
                if name == "admm" and n > dense_cap:
                    rows.append(BenchRow.empty(name, n, mm, kk, seed, "skipped", fp))
                    continue
                best = None
                try:
                    for _ in range(repeats):
                        rep = SOLVERS[name](
                            problem.measurements, problem.operator,
                            cfg.with_(dense_cap=dense_cap), x_true=problem.signal.values,
                        )
                        if best is None or rep.total_seconds < best.total_seconds:
                            best = rep
                    row = BenchRow.from_report(best, n, mm, kk, seed)
                except DenseCapError:
                    row = BenchRow.empty(name, n, mm, kk, seed, "skipped", fp)
                except (CircsenseError, ArithmeticError) as exc:
                    row = BenchRow.empty(name, n, mm, kk, seed, f"error:{type(exc).__name__}", fp)
                rows.append(row)
                if progress:
                    progress(row)
    return rows
