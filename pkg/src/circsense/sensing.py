"""Synthetic k-sparse signals, random partial-circulant sensing and measurements.

All randomness flows from PCG64 uniform doubles.  Gaussians come from a
Box-Muller transform and random subsets from ranking uniforms, so fixtures do
not depend on numpy's (unversioned) ziggurat or shuffle algorithms.
"""

from dataclasses import dataclass

import numpy as np

from .circulant import CirculantMatrix, PartialCirculantOperator, SubsamplingMask, partial_matvec
from .errors import DimensionError, ParameterError

# independent sub-streams derived from one user seed
_SIGNAL_STREAM = 1
_OPERATOR_STREAM = 2


def _uniforms(seed, stream):
    gen = np.random.Generator(np.random.PCG64([int(seed), stream]))
    return gen.random


def _gaussian(draw, size):
    u1 = draw(size)
    u2 = draw(size)
    return np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * np.pi * u2)


def _subset(draw, n, k):
    keys = draw(n)
    return np.sort(np.argsort(keys, kind="stable")[:k])


@dataclass(frozen=True)
class SparseSignal:
    values: np.ndarray
    support: np.ndarray

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def k(self):
        return self.support.shape[0]


@dataclass(frozen=True)
class SensingProblem:
    signal: SparseSignal
    operator: PartialCirculantOperator
    measurements: np.ndarray
    seed: int

    @property
    def n(self):
        return self.operator.n

    @property
    def m(self):
        return self.operator.m

    @property
    def k(self):
        return self.signal.k


def gen_sparse_signal(n, k, seed):
    """Return a k-sparse n-vector with uniform random support and N(0, 1) nonzeros."""
    n, k = int(n), int(k)
    if n < 1 or not 0 <= k <= n:
        raise ParameterError(f"need 0 <= k <= n and n >= 1, got n={n}, k={k}")
    draw = _uniforms(seed, _SIGNAL_STREAM)
    support = _subset(draw, n, k)
    values = np.zeros(n)
    if k:
        amp = _gaussian(draw, k)
        # a Box-Muller draw is exactly zero with probability ~0; keep exactly k nonzeros
        amp[amp == 0.0] = 1.0
        values[support] = amp
    return SparseSignal(values=values, support=support)


def gen_circulant_sensing(n, m, seed):
    """Random partial circulant ``P C``: Gaussian first row, uniform m-subset of rows."""
    n, m = int(n), int(m)
    if n < 1 or not 1 <= m <= n:
        raise ParameterError(f"need 1 <= m <= n, got n={n}, m={m}")
    draw = _uniforms(seed, _OPERATOR_STREAM)
    row = _gaussian(draw, n)
    omega = np.arange(n) if m == n else _subset(draw, n, m)
    return PartialCirculantOperator(CirculantMatrix(row), SubsamplingMask(omega, n))


def measure(operator, signal):
    """``y = A x*``; ``signal`` may be a SparseSignal or a plain vector."""
    x = signal.values if isinstance(signal, SparseSignal) else np.asarray(signal, float)
    if isinstance(operator, CirculantMatrix):
        operator = PartialCirculantOperator.full(operator)
    if x.shape != (operator.n,):
        raise DimensionError(f"signal shape {x.shape} does not match n={operator.n}")
    return partial_matvec(operator, x)


def protocol_sizes(n):
    """Default ``(m, k)`` for a given n: ``m = n // 2``, ``k = n // 10``."""
    return n // 2, n // 10


def make_problem(n, m=None, k=None, seed=0):
    """Generate signal, operator and measurements from one seed."""
    dm, dk = protocol_sizes(n)
    m = dm if m is None else m
    k = dk if k is None else k
    signal = gen_sparse_signal(n, k, seed)
    op = gen_circulant_sensing(n, m, seed)
    return SensingProblem(signal=signal, operator=op, measurements=measure(op, signal), seed=int(seed))
