"""LASSO solvers: ISTA, dense ADMM and circulant ADMM, plus recovery metrics.

The three solvers share one problem,

    minimize  ||y - A x||_2^2 + 2 alpha ||x||_1,

written here as ``lasso_objective``.  Each solver is split into a pure
single-iteration ``*_step`` function and a ``*_run`` driver that owns setup,
stopping and timing; the kernel-phase executor in :mod:`circsense.parallel`
is checked against the step functions.
"""

import math
import time
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional

import numpy as np

from .circulant import (
    DENSE_CAP,
    CirculantMatrix,
    PartialCirculantOperator,
    circ_matvec_fft,
    circ_transpose_matvec,
    dense_materialize,
    mask_gram_inverse,
    regularized_gram_inverse,
    spectral_norm,
)
from .errors import DenseCapError, DimensionError, DivergenceError, ParameterError

GOLDEN = (math.sqrt(5.0) + 1.0) / 2.0
DEFAULT_ADMM_RHO = 0.1
AUTO_TAU_FRACTION = 0.9


class DenseOperator:
    """Thin adapter giving a dense array the operator interface."""

    def __init__(self, matrix):
        self.matrix = np.asarray(matrix, dtype=np.float64)
        if self.matrix.ndim != 2:
            raise DimensionError("dense operator must be a 2-D array")

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def m(self):
        return self.matrix.shape[0]

    @property
    def n(self):
        return self.matrix.shape[1]

    def matvec(self, x):
        return self.matrix @ x

    def rmatvec(self, r):
        return self.matrix.T @ r


def as_operator(A):
    if isinstance(A, CirculantMatrix):
        return PartialCirculantOperator.full(A)
    if isinstance(A, (PartialCirculantOperator, DenseOperator)):
        return A
    return DenseOperator(A)


def operator_norm_bound(A):
    """``||A||_2`` for dense operators, the circulant bound ``||C||_2`` otherwise."""
    A = as_operator(A)
    if isinstance(A, DenseOperator):
        return float(np.linalg.norm(A.matrix, 2))
    return spectral_norm(A)


@dataclass(frozen=True)
class SolverConfig:
    """Parameters shared by the three solvers.

    ``tau=None`` selects ``0.9 / ||A||^2`` for ISTA.  ``rho=None`` selects 0.1
    for dense ADMM and ``sigma / ||c||^2`` for circulant ADMM.  ``threshold``
    picks the ISTA shrinkage: ``"literal"`` applies ``eta_alpha`` after the
    gradient step, ``"proximal"`` applies ``eta_{tau alpha}``.
    """

    alpha: float = 1e-4
    tau: Optional[float] = None
    rho: Optional[float] = None
    sigma: float = 0.1
    tau1: float = 1.0
    tau2: float = 1.0
    max_iter: int = 10000
    target_mse: Optional[float] = 1e-4
    check_every: int = 10
    threshold: str = "literal"
    dense_cap: int = DENSE_CAP
    scalar_width: int = 8

    def __post_init__(self):
        if not self.alpha > 0:
            raise ParameterError(f"alpha must be positive, got {self.alpha}")
        if self.tau is not None and not self.tau > 0:
            raise ParameterError(f"tau must be positive, got {self.tau}")
        if self.rho is not None and not self.rho > 0:
            raise ParameterError(f"rho must be positive, got {self.rho}")
        if not self.sigma > 0:
            raise ParameterError(f"sigma must be positive, got {self.sigma}")
        for name in ("tau1", "tau2"):
            val = getattr(self, name)
            if not 0 < val < GOLDEN:
                raise ParameterError(f"{name} must lie in (0, {GOLDEN:.6f}), got {val}")
        if self.max_iter < 1 or self.check_every < 1:
            raise ParameterError("max_iter and check_every must be >= 1")
        if self.threshold not in ("literal", "proximal"):
            raise ParameterError(f"threshold must be 'literal' or 'proximal', got {self.threshold!r}")

    def with_(self, **changes):
        return replace(self, **changes)


class TracePoint(NamedTuple):
    iteration: int
    mse: float
    elapsed: float


@dataclass(frozen=True)
class RecoveryReport:
    algorithm: str
    final_x: np.ndarray
    iterations: int
    mse_trace: tuple
    setup_seconds: float
    total_seconds: float
    footprint_bytes: int
    converged: bool
    final_mse: float = float("nan")
    params: dict = field(default_factory=dict)

    @property
    def iterations_per_second(self):
        loop = self.total_seconds - self.setup_seconds
        return self.iterations / loop if loop > 0 else float("inf")


def soft_threshold(x, gamma):
    """Elementwise ``sgn(x) (|x| - gamma)`` where ``|x| > gamma``, else 0."""
    if gamma < 0:
        raise ParameterError(f"threshold must be non-negative, got {gamma}")
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.maximum(np.abs(x) - gamma, 0.0)


def mse(x_hat, x_star):
    x_hat = np.asarray(x_hat, dtype=np.float64)
    x_star = np.asarray(x_star, dtype=np.float64)
    if x_hat.shape != x_star.shape:
        raise DimensionError(f"shape mismatch {x_hat.shape} vs {x_star.shape}")
    d = x_star - x_hat
    return float(np.dot(d, d) / d.size)


def lasso_objective(x, A, y, alpha):
    """``||y - A x||^2 + 2 alpha ||x||_1``."""
    r = y - as_operator(A).matvec(x)
    return float(np.dot(r, r) + 2.0 * alpha * np.sum(np.abs(x)))


# analytic storage in scalars; n-vectors only for the circulant solvers
_FOOTPRINT_KINDS = {
    "cpista": lambda n, m: 4 * n,
    "cpadmm": lambda n, m: 10 * n,
    "padmm": lambda n, m: n * n + 5 * n,
    "pista": lambda n, m: 2 * m * n + n + 2 * m,
}
_SOLVER_KIND = {"ista": "cpista", "cadmm": "cpadmm", "admm": "padmm"}


def analytic_footprint(kind, n, m=None, scalar_width=8):
    """Bytes of persistent storage for a solver kind at size n.

    ``cpista`` 4n and ``cpadmm`` 10n scalars, ``padmm`` n^2 + 5n (dense inverse
    plus vectors), ``pista`` 2mn + n + 2m (dense A and A^T).  The solver names
    ``ista``, ``cadmm`` and ``admm`` alias the first three.
    """
    kind = _SOLVER_KIND.get(kind, kind)
    if kind not in _FOOTPRINT_KINDS:
        raise ParameterError(f"unknown footprint kind {kind!r}")
    n = int(n)
    m = n // 2 if m is None else int(m)
    return _FOOTPRINT_KINDS[kind](n, m) * int(scalar_width)


# ---------------------------------------------------------------- states


@dataclass
class IstaState:
    x: np.ndarray
    r: np.ndarray
    delta: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, n, m):
        return cls(np.zeros(n), np.zeros(m), np.zeros(n))


@dataclass
class AdmmState:
    x: np.ndarray
    z: np.ndarray
    u: np.ndarray
    B: np.ndarray
    Aty: np.ndarray
    t: int = 0


@dataclass
class CadmmState:
    x: np.ndarray
    z: np.ndarray
    nu: np.ndarray
    mu: np.ndarray
    v: np.ndarray
    beta: np.ndarray
    B: CirculantMatrix
    D: object
    t: int = 0


def ista_step(state, A, y, tau, gamma):
    """One ISTA iteration; returns a new state."""
    r = y - A.matvec(state.x)
    delta = tau * A.rmatvec(r)
    x = soft_threshold(state.x + delta, gamma)
    return IstaState(x=x, r=r, delta=delta, t=state.t + 1)


def admm_step(state, rho, alpha):
    x = state.B @ (state.Aty + rho * (state.z - state.u))
    z = soft_threshold(x + state.u, alpha / rho)
    u = state.u + x - z
    return replace(state, x=x, z=z, u=u, t=state.t + 1)


def cadmm_step(state, C, Pty, rho, sigma, alpha, tau1, tau2):
    """One circulant-ADMM iteration.

    ``state.v`` enters holding ``v + mu`` from the previous iteration, which is
    what the x-update needs; the fresh v-update does not read it.
    """
    beta = rho * circ_transpose_matvec(C, state.v) + sigma * (state.z - state.nu)
    x = circ_matvec_fft(state.B, beta)
    Cx = circ_matvec_fft(C, x)
    v = state.D.matvec(rho * Cx - rho * state.mu + Pty)
    z = soft_threshold(x + state.nu, alpha / sigma)
    mu = state.mu + tau1 * (v - Cx)
    nu = state.nu + tau2 * (x - z)
    v = v + mu
    return replace(state, x=x, z=z, nu=nu, mu=mu, v=v, beta=beta, t=state.t + 1)


# ---------------------------------------------------------------- drivers


def _check_y(y, A):
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (A.m,):
        raise DimensionError(f"measurements have shape {y.shape}, operator expects ({A.m},)")
    return y


def _loop(algorithm, step, state, n, cfg, x_true, t0, setup, footprint, params):
    if x_true is not None:
        x_true = np.asarray(x_true, dtype=np.float64)
        if x_true.shape != (n,):
            raise DimensionError(f"x_true has shape {x_true.shape}, expected ({n},)")
    trace = []
    converged = False
    target = cfg.target_mse
    for t in range(1, cfg.max_iter + 1):
        prev_x = state.x
        state = step(state)
        if not np.all(np.isfinite(state.x)):
            raise DivergenceError(f"{algorithm}: non-finite iterate at iteration {t}")
        if t % cfg.check_every == 0 or t == cfg.max_iter:
            elapsed = time.perf_counter() - t0
            if x_true is not None:
                err = mse(state.x, x_true)
                trace.append(TracePoint(t, err, elapsed))
                if target is not None and err <= target:
                    converged = True
                    break
            else:
                trace.append(TracePoint(t, float("nan"), elapsed))
                d = state.x - prev_x
                change = math.sqrt(float(np.dot(d, d)) / n)
                if target is not None and change <= target:
                    converged = True
                    break
    total = time.perf_counter() - t0
    final_mse = mse(state.x, x_true) if x_true is not None else float("nan")
    return RecoveryReport(
        algorithm=algorithm,
        final_x=state.x,
        iterations=state.t,
        mse_trace=tuple(trace),
        setup_seconds=setup,
        total_seconds=total,
        footprint_bytes=footprint,
        converged=converged,
        final_mse=final_mse,
        params=params,
    )


def ista_threshold(cfg, tau):
    return cfg.alpha if cfg.threshold == "literal" else tau * cfg.alpha


def ista_run(y, A, cfg=None, x_true=None):
    """Iterative soft thresholding from ``x(0) = 0``.

    Stops after ``cfg.max_iter`` iterations, or at a check point where the MSE
    against ``x_true`` (when given) or the iterate change
    ``||x(t) - x(t-1)|| / sqrt(n)`` (otherwise) is at most ``cfg.target_mse``.
    """
    cfg = cfg or SolverConfig()
    t0 = time.perf_counter()
    A = as_operator(A)
    y = _check_y(y, A)
    norm = operator_norm_bound(A)
    bound = norm**-2 if norm > 0 else math.inf
    tau = AUTO_TAU_FRACTION * bound if cfg.tau is None else cfg.tau
    if not 0 < tau < bound:
        raise ParameterError(f"tau={tau:g} outside (0, ||A||^-2 = {bound:g})")
    gamma = ista_threshold(cfg, tau)
    state = IstaState.zeros(A.n, A.m)
    setup = time.perf_counter() - t0
    kind = "pista" if isinstance(A, DenseOperator) else "cpista"
    fp = analytic_footprint(kind, A.n, A.m, cfg.scalar_width)
    return _loop(
        "ista",
        lambda s: ista_step(s, A, y, tau, gamma),
        state, A.n, cfg, x_true, t0, setup, fp,
        {"tau": tau, "gamma": gamma, "alpha": cfg.alpha, "threshold": cfg.threshold},
    )


def admm_dense_run(y, A, cfg=None, x_true=None):
    """ADMM with an explicit dense ``(A^T A + rho I)^{-1}`` computed up front.

    The O(n^3) inversion is timed into ``setup_seconds``.
    """
    cfg = cfg or SolverConfig()
    t0 = time.perf_counter()
    op = as_operator(A)
    y = _check_y(y, op)
    if op.n > cfg.dense_cap:
        raise DenseCapError(f"dense ADMM refused: n={op.n} > cap {cfg.dense_cap}")
    rho = DEFAULT_ADMM_RHO if cfg.rho is None else cfg.rho
    M = op.matrix if isinstance(op, DenseOperator) else dense_materialize(op, cap=cfg.dense_cap)
    gram = M.T @ M
    gram[np.diag_indices_from(gram)] += rho
    B = np.linalg.inv(gram)
    Aty = M.T @ y
    del gram, M
    n = op.n
    state = AdmmState(np.zeros(n), np.zeros(n), np.zeros(n), B, Aty)
    setup = time.perf_counter() - t0
    fp = analytic_footprint("padmm", n, op.m, cfg.scalar_width)
    return _loop(
        "admm",
        lambda s: admm_step(s, rho, cfg.alpha),
        state, n, cfg, x_true, t0, setup, fp,
        {"rho": rho, "alpha": cfg.alpha},
    )


def cadmm_rho(C, cfg):
    """Circulant-ADMM penalty: ``cfg.rho`` or ``sigma / ||c||^2``."""
    if cfg.rho is not None:
        return cfg.rho
    energy = float(np.dot(C.first_row, C.first_row))
    return cfg.sigma / energy if energy > 0 else cfg.sigma


def cadmm_setup(A, cfg, y):
    """Precompute B, D and ``P^T y``; returns ``(state, rho, Pty)``."""
    C = A.circulant
    rho = cadmm_rho(C, cfg)
    B = regularized_gram_inverse(C, rho, cfg.sigma)
    D = mask_gram_inverse(A.mask, rho)
    n = A.n
    zeros = np.zeros(n)
    state = CadmmState(
        x=zeros.copy(), z=zeros.copy(), nu=zeros.copy(), mu=zeros.copy(),
        v=zeros.copy(), beta=zeros.copy(), B=B, D=D,
    )
    return state, rho, A.mask.embed(y)


def cadmm_run(y, A, cfg=None, x_true=None):
    """Circulant ADMM for ``A = P C``.

    Setup inverts ``rho C^T C + sigma I`` through the FFT and ``P^T P + rho I``
    as a diagonal, both O(n log n) at most and timed into ``setup_seconds``.
    """
    cfg = cfg or SolverConfig()
    t0 = time.perf_counter()
    A = as_operator(A)
    if not isinstance(A, PartialCirculantOperator):
        raise ParameterError("cadmm_run needs a circulant or partial circulant operator")
    y = _check_y(y, A)
    state, rho, Pty = cadmm_setup(A, cfg, y)
    setup = time.perf_counter() - t0
    C = A.circulant
    fp = analytic_footprint("cpadmm", A.n, A.m, cfg.scalar_width)
    return _loop(
        "cadmm",
        lambda s: cadmm_step(s, C, Pty, rho, cfg.sigma, cfg.alpha, cfg.tau1, cfg.tau2),
        state, A.n, cfg, x_true, t0, setup, fp,
        {"rho": rho, "sigma": cfg.sigma, "alpha": cfg.alpha, "tau1": cfg.tau1, "tau2": cfg.tau2},
    )


SOLVERS = {"ista": ista_run, "admm": admm_dense_run, "cadmm": cadmm_run}


def fixed_point_residual(x, A, y, tau, gamma):
    """``max |x - eta_gamma[x + tau A^T (y - A x)]|``; zero at an ISTA limit."""
    A = as_operator(A)
    return float(np.max(np.abs(x - soft_threshold(x + tau * A.rmatvec(y - A.matvec(x)), gamma))))
