"""Command-line front end.

Exit codes: 0 success, 1 usage or I/O error, 2 numerical failure (divergence,
singular setup, or a recovery that missed its target).
"""

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import bench, io
from .deblur import DEBLUR_DEFAULTS, deblur_pipeline, star_field
from .errors import CircsenseError, ConsistencyError, DivergenceError, SingularityError
from .parallel import SchemeKind, matvec_scheme_bench
from .sensing import make_problem, protocol_sizes
from .solvers import SOLVERS, SolverConfig

log = logging.getLogger("circsense")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2


def _int_list(text):
    try:
        return [int(float(t)) for t in text.split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _str_list(text):
    return [t for t in text.split(",") if t]


def _solver_args(p, alpha=1e-4):
    p.add_argument("--alpha", type=float, default=alpha, help="l1 weight")
    p.add_argument("--rho", type=float, default=None, help="ADMM penalty (solver default if unset)")
    p.add_argument("--sigma", type=float, default=0.1, help="circulant-ADMM penalty")
    p.add_argument("--tau", type=float, default=None, help="ISTA step (0.9/||A||^2 if unset)")
    p.add_argument("--tau1", type=float, default=1.0)
    p.add_argument("--tau2", type=float, default=1.0)
    p.add_argument("--max-iter", type=int, default=10000)
    p.add_argument("--target-mse", type=float, default=1e-4)
    p.add_argument("--check-every", type=int, default=10)
    p.add_argument("--threshold", choices=("literal", "proximal"), default="literal",
                   help="ISTA shrinkage pairing")


def _config(args, **extra):
    return SolverConfig(
        alpha=args.alpha, tau=args.tau, rho=args.rho, sigma=args.sigma,
        tau1=args.tau1, tau2=args.tau2, max_iter=args.max_iter,
        target_mse=args.target_mse, check_every=args.check_every,
        threshold=args.threshold, **extra,
    )


def cmd_gen(args):
    dm, dk = protocol_sizes(args.n)
    m = dm if args.m is None else args.m
    k = dk if args.k is None else args.k
    problem = make_problem(args.n, m, k, args.seed)
    out = io.save_problem(problem, args.out)
    print(f"wrote n={problem.n} m={problem.m} k={problem.k} seed={problem.seed} to {out}")
    return EXIT_OK


def cmd_recover(args):
    problem = io.load_problem(args.problem)
    cfg = _config(args)
    report = SOLVERS[args.solver](
        problem.measurements, problem.operator, cfg, x_true=problem.signal.values
    )
    row = bench.BenchRow.from_report(report, problem.n, problem.m, problem.k, problem.seed)
    bench.write_rows(sys.stdout, [row])
    if args.out:
        bench.write_rows(args.out, [row])
    if args.trace:
        with open(args.trace, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("iteration", "mse", "elapsed_s"))
            w.writerows(report.mse_trace)
    if args.x_out:
        io.write_vector(args.x_out, report.final_x)
    return EXIT_OK if report.converged else EXIT_NUMERIC


def cmd_bench(args):
    cfg = _config(args)
    rows = bench.run_sweep(
        args.n, solvers=args.solvers, seeds=args.seeds, repeats=args.repeats,
        cfg=cfg, dense_cap=args.dense_cap,
        progress=lambda r: log.info("%s n=%d seed=%d %s", r.algorithm, r.n, r.seed, r.status),
    )
    bench.write_rows(args.out, rows)
    print(f"wrote {len(rows)} rows to {args.out}")
    return EXIT_OK


def cmd_matvec_bench(args):
    rows = []
    print(f"{'scheme':>10} {'n':>7} {'mean_s':>11} {'min_s':>11} {'fetch_total':>12} {'fetch_vec':>10}")
    for n in args.n:
        for scheme in args.schemes:
            kind = SchemeKind(scheme)
            if kind is SchemeKind.REFERENCE and n > args.dense_cap:
                log.warning("reference scheme skipped at n=%d (dense cap %d)", n, args.dense_cap)
                continue
            t = matvec_scheme_bench(n, kind, repeats=args.repeats, seed=args.seed,
                                    dense_cap=args.dense_cap)
            print(f"{t.scheme:>10} {t.n:>7} {t.mean_s:>11.3e} {t.min_s:>11.3e} "
                  f"{t.fetch_total:>12} {t.fetch_vectors:>10}")
            rows.append(bench.BenchRow.from_timing(t, args.seed))
    if args.out:
        bench.write_rows(args.out, rows)
    return EXIT_OK


def cmd_deblur(args):
    image = io.read_pgm(args.image)
    cfg = DEBLUR_DEFAULTS.with_(alpha=args.alpha, max_iter=args.max_iter)
    res = deblur_pipeline(image, L=args.L, m_ratio=args.m_ratio, cfg=cfg, seed=args.seed)
    prefix = Path(args.out)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    io.write_pgm(f"{prefix}_recovered.pgm", res.image)
    err = res.error_map
    peak = float(np.max(err)) if err.size and np.max(err) > 0 else 1.0
    io.write_pgm(f"{prefix}_error.pgm", type(res.image)(image.width, image.height, err / peak))
    stats = dict(res.stats, error_map_peak=peak)
    with open(f"{prefix}_stats.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(stats.keys())
        w.writerow(stats.values())
    print(", ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in stats.items()))
    return EXIT_OK


def cmd_starfield(args):
    img = star_field(args.width, args.height, fraction=args.fraction, seed=args.seed)
    io.write_pgm(args.out, img)
    print(f"wrote {args.width}x{args.height} star field to {args.out}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="circsense", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a seeded sparse-recovery problem")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, default=None, help="measurements (default n//2)")
    p.add_argument("--k", type=int, default=None, help="sparsity (default n//10)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("recover", help="recover a generated problem")
    p.add_argument("problem", help="problem directory written by 'gen'")
    p.add_argument("--solver", choices=sorted(SOLVERS), default="cadmm")
    _solver_args(p)
    p.add_argument("--out", help="CSV report path")
    p.add_argument("--trace", help="CSV path for the MSE trace")
    p.add_argument("--x-out", help="binary vector path for the recovered signal")
    p.set_defaults(func=cmd_recover)

    p = sub.add_parser("bench", help="sweep sizes, solvers and seeds")
    p.add_argument("--n", type=_int_list, required=True, help="comma-separated sizes")
    p.add_argument("--solvers", type=_str_list, default=["ista", "admm", "cadmm"])
    p.add_argument("--seeds", type=_int_list, default=[0])
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--dense-cap", type=int, default=4096)
    _solver_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("matvec-bench", help="Reference vs Circulant matvec schemes")
    p.add_argument("--n", type=_int_list, required=True)
    p.add_argument("--schemes", type=_str_list, default=["reference", "circulant"])
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dense-cap", type=int, default=4096)
    p.add_argument("--out")
    p.set_defaults(func=cmd_matvec_bench)

    p = sub.add_parser("deblur", help="compressed deblurring of a P5 PGM image")
    p.add_argument("image")
    p.add_argument("--L", type=int, default=5, help="blur order")
    p.add_argument("--m-ratio", type=float, default=0.5)
    p.add_argument("--alpha", type=float, default=1e-2)
    p.add_argument("--max-iter", type=int, default=DEBLUR_DEFAULTS.max_iter)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output prefix")
    p.set_defaults(func=cmd_deblur)

    p = sub.add_parser("starfield", help="write a synthetic star-field PGM")
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--fraction", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_starfield)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (DivergenceError, SingularityError, ConsistencyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (CircsenseError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
