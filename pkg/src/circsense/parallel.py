"""Data-parallel kernel phases in the work-item model, run on host threads.

A :class:`KernelPhase` is a batch of independent work items, each identified
by a global id and owning the output entries that id maps to.  Phases are
separated by barriers: :func:`run_phase` returns only after every item has
finished, and it publishes outputs only after the barrier, so readers inside a
phase always see the pre-phase values.

Inside one work item the reductions run over ``j`` in ascending order, exactly
like the for-loops of the GPU kernels, so results are bitwise identical for
every degree of parallelism.  Index expressions follow the package-wide
circulant rule ``A[i, j] = c[(j - i) % n]``.
"""

import enum
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np

from .circulant import DENSE_CAP, CirculantMatrix, dense_materialize
from .errors import DenseCapError, DimensionError, PhaseError
from .solvers import soft_threshold

THREADS_ENV = "CIRCSENSE_THREADS"


def default_parallelism():
    env = os.environ.get(THREADS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass
class KernelPhase:
    """One kernel launch.

    ``body(ids)`` computes the work items ``ids`` and returns a mapping from
    output name to the values those items produce (one per id, in order).
    ``index_map(ids)`` names the output addresses written; identity by default.
    """

    name: str
    work_items: int
    body: Callable[[np.ndarray], dict]
    outputs: dict
    index_map: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def addresses(self, ids):
        return ids if self.index_map is None else np.asarray(self.index_map(ids))


def _run_chunk(phase, ids):
    try:
        return phase.body(ids)
    except Exception as exc:
        # re-run item by item to name the failing global id
        for gid in ids:
            try:
                phase.body(np.array([gid]))
            except Exception:
                raise PhaseError(f"phase {phase.name!r}: work item {gid} failed: {exc}", int(gid)) from exc
        raise PhaseError(f"phase {phase.name!r} failed: {exc}") from exc


def run_phase(phase, parallelism=None, instrument=False):
    """Execute every work item of ``phase`` and wait for all of them.

    With ``instrument=True`` every output address is counted and a second
    write to the same address raises :class:`PhaseError`.
    """
    parallelism = default_parallelism() if parallelism is None else int(parallelism)
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    if phase.work_items == 0:
        return
    chunks = np.array_split(np.arange(phase.work_items), min(parallelism, phase.work_items))
    if len(chunks) == 1:
        results = [_run_chunk(phase, chunks[0])]
    else:
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            results = list(pool.map(lambda ids: _run_chunk(phase, ids), chunks))

    if instrument:
        for name, buf in phase.outputs.items():
            counts = np.zeros(buf.shape[0], dtype=np.int64)
            for ids in chunks:
                np.add.at(counts, phase.addresses(ids), 1)
            if np.any(counts > 1):
                addr = int(np.argmax(counts > 1))
                owners = [int(g) for ids in chunks for g, a in zip(ids, phase.addresses(ids)) if a == addr]
                raise PhaseError(
                    f"phase {phase.name!r}: output {name!r}[{addr}] written by items {owners}",
                    owners[1],
                )

    for ids, res in zip(chunks, results):
        addr = phase.addresses(ids)
        for name, values in res.items():
            phase.outputs[name][addr] = values


def run_pipeline(phases, parallelism=None, instrument=False):
    for phase in phases:
        run_phase(phase, parallelism, instrument)


# ------------------------------------------------------------ shift-indexed sums


def _shift_sum(vec, x, ids, sign):
    """Per-item ``sum_j vec[(sign * (j - i)) % n] * x[j]`` with ascending j."""
    n = vec.shape[0]
    s = np.zeros(ids.shape[0])
    for j in range(x.shape[0]):
        s += vec[(sign * (j - ids)) % n] * x[j]
    return s


# ------------------------------------------------------------ CPADMM


@dataclass
class CadmmInputs:
    C: CirculantMatrix
    Pty: np.ndarray
    rho: float
    sigma: float
    alpha: float
    tau1: float = 1.0
    tau2: float = 1.0


def cpadmm_phases(state, inputs):
    """The three CPADMM kernels bound to ``state``'s buffers.

    Running them in order performs one circulant-ADMM iteration in place:
    primal update (beta), signal recovery (x), thresholded variables update
    (v, z, mu, nu).
    """
    n = state.x.shape[0]
    for name in ("z", "nu", "mu", "v", "beta"):
        if getattr(state, name).shape != (n,):
            raise DimensionError(f"state.{name} does not have length {n}")
    if inputs.C.n != n or inputs.Pty.shape != (n,):
        raise DimensionError("inputs do not match state dimension")
    c = inputs.C.first_row
    b = state.B.first_row
    d = state.D.diag
    rho, sigma = inputs.rho, inputs.sigma
    gamma = inputs.alpha / sigma

    def primal(ids):
        s = _shift_sum(c, state.v, ids, -1)  # (C^T v)_i
        return {"beta": rho * s + sigma * (state.z[ids] - state.nu[ids])}

    def recover(ids):
        return {"x": _shift_sum(b, state.beta, ids, 1)}  # (B beta)_i

    def thresholded(ids):
        s = _shift_sum(c, state.x, ids, 1)  # (C x)_i
        v = d[ids] * (rho * s - rho * state.mu[ids] + inputs.Pty[ids])
        z = soft_threshold(state.x[ids] + state.nu[ids], gamma)
        mu = state.mu[ids] + inputs.tau1 * (v - s)
        nu = state.nu[ids] + inputs.tau2 * (state.x[ids] - z)
        return {"v": v + mu, "z": z, "mu": mu, "nu": nu}

    return [
        KernelPhase("primal_variables_update", n, primal, {"beta": state.beta}),
        KernelPhase("signal_recovery", n, recover, {"x": state.x}),
        KernelPhase(
            "thresholded_variables_update", n, thresholded,
            {"v": state.v, "z": state.z, "mu": state.mu, "nu": state.nu},
        ),
    ]


# ------------------------------------------------------------ CPISTA


@dataclass
class IstaInputs:
    A: object  # PartialCirculantOperator
    y: np.ndarray
    tau: float
    gamma: float


def cpista_phases(state, inputs):
    """Residual computation (m items) and thresholded gradient (n items)."""
    A = inputs.A
    n, m = A.n, A.m
    if state.x.shape != (n,) or state.r.shape != (m,) or inputs.y.shape != (m,):
        raise DimensionError("state / inputs do not match operator shape")
    c = A.circulant.first_row
    omega = A.mask.omega
    tau, gamma = inputs.tau, inputs.gamma

    def residual(ids):
        rows = omega[ids]
        s = np.zeros(ids.shape[0])
        for j in range(n):
            s += c[(j - rows) % n] * state.x[j]
        return {"r": inputs.y[ids] - s}

    def gradient(ids):
        s = np.zeros(ids.shape[0])
        for j in range(m):
            s += c[(ids - omega[j]) % n] * state.r[j]
        delta = tau * s
        return {"delta": delta, "x": soft_threshold(state.x[ids] + delta, gamma)}

    return [
        KernelPhase("residual_computation", m, residual, {"r": state.r}),
        KernelPhase("thresholded_gradient", n, gradient, {"delta": state.delta, "x": state.x}),
    ]


# ------------------------------------------------------------ PADMM


@dataclass
class AdmmInputs:
    rho: float
    alpha: float
    c_vec: np.ndarray = None  # A^T y + rho (z - u), refreshed by phase 2


def padmm_phases(state, inputs, dense_cap=DENSE_CAP):
    """Dense-reference ADMM: primal/dual update (n items) then C(t) refresh (n items)."""
    n = state.x.shape[0]
    if n > dense_cap:
        raise DenseCapError(f"n={n} exceeds dense cap {dense_cap}")
    if state.B.shape != (n, n):
        raise DimensionError("B must be n x n")
    rho = inputs.rho
    gamma = inputs.alpha / rho
    if inputs.c_vec is None:
        inputs.c_vec = state.Aty + rho * (state.z - state.u)
    cvec = inputs.c_vec
    B = state.B

    def update(ids):
        s = np.zeros(ids.shape[0])
        for j in range(n):
            s += B[ids, j] * cvec[j]
        z = soft_threshold(s + state.u[ids], gamma)
        return {"x": s, "z": z, "u": state.u[ids] + s - z}

    def refresh(ids):
        return {"c": rho * (state.z[ids] - state.u[ids]) + state.Aty[ids]}

    return [
        KernelPhase("primal_dual_update", n, update, {"x": state.x, "z": state.z, "u": state.u}),
        KernelPhase("rhs_refresh", n, refresh, {"c": cvec}),
    ]


def iterate_phases(make_phases, state, inputs, iterations, parallelism=None, instrument=False):
    """Run ``iterations`` full iterations of a phase pipeline on ``state`` in place."""
    phases = make_phases(state, inputs)
    for _ in range(iterations):
        run_pipeline(phases, parallelism, instrument)
        state.t += 1
    return state


# ------------------------------------------------------------ matvec schemes


class SchemeKind(enum.Enum):
    REFERENCE = "reference"
    CIRCULANT = "circulant"


class SchemeTiming(NamedTuple):
    scheme: str
    n: int
    repeats: int
    mean_s: float
    min_s: float
    fetch_total: int
    fetch_vectors: int


def unique_fetches(scheme, n):
    """Unique global-memory addresses read in the fetch stage.

    Returns ``(total, vectors)``.  Circulant reads the first row and the input
    vector, 2n either way.  Reference reads all n^2 matrix entries plus the
    input vector; counting vector-sized traffic only gives 3n.
    """
    scheme = SchemeKind(scheme)
    if scheme is SchemeKind.CIRCULANT:
        return 2 * n, 2 * n
    return n * n + n, 3 * n


_KERNELS = {}


def _reference(A, x, out):
    rows, cols = A.shape
    for i in _prange(rows):
        s = 0.0
        for j in range(cols):
            s += A[i, j] * x[j]
        out[i] = s


def _circulant(c, x, out):
    n = c.shape[0]
    # stage the first row twice, like a local-memory copy; row i is then the
    # contiguous window cc[n - i : 2n - i] and global reads stay at c and x
    cc = np.empty(2 * n)
    cc[:n] = c
    cc[n:] = c
    for i in _prange(n):
        s = 0.0
        off = n - i
        for j in range(n):
            s += cc[off + j] * x[j]
        out[i] = s


def _prange(*args):  # replaced by numba.prange at compile time
    return range(*args)


def _kernels():
    """Compile both schemes twice: serial (parallelism 1) and multi-threaded."""
    if not _KERNELS:
        import numba

        if "NUMBA_THREADING_LAYER_PRIORITY" not in os.environ:
            # skip the TBB probe, which warns on hosts with an outdated TBB
            numba.config.THREADING_LAYER_PRIORITY = ["omp", "tbb", "workqueue"]
        globals()["_prange"] = numba.prange
        for parallel in (False, True):
            jit = numba.njit(parallel=parallel, fastmath=True)
            _KERNELS["reference", parallel] = jit(_reference)
            _KERNELS["circulant", parallel] = jit(_circulant)
        _KERNELS["numba"] = numba
    return _KERNELS


def scheme_matvec(scheme, c, x, dense=None, parallel=False):
    """One work-item-per-row product under the given scheme."""
    k = _kernels()
    out = np.empty(c.shape[0])
    if SchemeKind(scheme) is SchemeKind.CIRCULANT:
        k["circulant", parallel](c, x, out)
    else:
        k["reference", parallel](dense, x, out)
    return out


def matvec_scheme_bench(n, scheme, repeats=5, seed=0, parallelism=None, dense_cap=DENSE_CAP):
    """Time ``repeats`` products of a random n x n circulant with a random vector."""
    scheme = SchemeKind(scheme)
    if scheme is SchemeKind.REFERENCE and n > dense_cap:
        raise DenseCapError(f"reference scheme refused: n={n} > cap {dense_cap}")
    k = _kernels()
    numba = k["numba"]
    threads = default_parallelism() if parallelism is None else int(parallelism)
    threads = max(1, min(threads, numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(threads)
    parallel = threads > 1
    gen = np.random.Generator(np.random.PCG64(seed))
    c = gen.standard_normal(n)
    x = gen.standard_normal(n)
    dense = dense_materialize(CirculantMatrix(c), cap=dense_cap) if scheme is SchemeKind.REFERENCE else None
    scheme_matvec(scheme, c, x, dense, parallel)  # compile and warm caches
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        scheme_matvec(scheme, c, x, dense, parallel)
        times.append(time.perf_counter() - t0)
    total, vectors = unique_fetches(scheme, n)
    return SchemeTiming(scheme.value, n, repeats, float(np.mean(times)), float(np.min(times)), total, vectors)
