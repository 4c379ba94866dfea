"""Circulant, diagonal and partial-circulant operators with O(n) storage.

Index convention used everywhere in the package: the dense matrix implied by
a circulant with defining vector ``c`` has entries ``A[i, j] = c[(j - i) % n]``,
i.e. row ``i`` is ``c`` cyclically shifted right by ``i``.  Under this rule

    C x   = ifft(conj(fft(c)) * fft(x))      (circular cross-correlation)
    C^T x = ifft(fft(c) * fft(x))            (circular convolution)

so ``C^T C`` has eigenvalues ``|fft(c)|**2`` and products of circulants have
defining vectors given by circular convolution.
"""

from typing import NamedTuple

import numpy as np

from .errors import (
    ConsistencyError,
    DenseCapError,
    DimensionError,
    ParameterError,
    SingularityError,
)

#: Largest dimension for which an n x n dense matrix may be built.
DENSE_CAP = 4096

#: Relative imaginary residue tolerated after an inverse DFT of a real result.
IMAG_TOL = 1e-10

#: Smallest admissible eigenvalue magnitude of an operator to be inverted.
SINGULAR_TOL = 1e-14


def _as_vector(x, name="x"):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionError(f"{name} must be one-dimensional, got shape {x.shape}")
    return x


def _check_len(x, n, name="x"):
    x = _as_vector(x, name)
    if x.shape[0] != n:
        raise DimensionError(f"{name} has length {x.shape[0]}, expected {n}")
    return x


def _real_part(z):
    """Drop the imaginary part of an inverse DFT that must be real."""
    scale = max(float(np.max(np.abs(z.real), initial=0.0)), np.finfo(float).tiny)
    residue = float(np.max(np.abs(z.imag), initial=0.0))
    if residue > IMAG_TOL * scale:
        raise ConsistencyError(
            f"imaginary residue {residue:.3e} exceeds {IMAG_TOL:g} relative to {scale:.3e}"
        )
    return np.ascontiguousarray(z.real)


class Footprint(NamedTuple):
    """Analytic storage of an operator: real scalars, complex cache, indices."""

    scalars: int
    cached_complex: int = 0
    indices: int = 0


class CirculantMatrix:
    """Square circulant operator stored as its first row.

    The spectrum (forward DFT of the first row) is computed on first use and
    cached.  Population is compute-then-publish, so concurrent readers may at
    worst compute it twice.
    """

    __slots__ = ("_row", "_spectrum")

    def __init__(self, first_row):
        row = np.array(first_row, dtype=np.float64, copy=True)
        if row.ndim != 1 or row.shape[0] < 1:
            raise DimensionError("first_row must be a non-empty vector")
        row.flags.writeable = False
        self._row = row
        self._spectrum = None

    @classmethod
    def identity(cls, n):
        row = np.zeros(n)
        row[0] = 1.0
        return cls(row)

    @classmethod
    def shift(cls, n, k=1):
        """Cyclic shift with ``(S x)[i] = x[(i + k) % n]``."""
        row = np.zeros(n)
        row[k % n] = 1.0
        return cls(row)

    @property
    def first_row(self):
        return self._row

    @property
    def n(self):
        return self._row.shape[0]

    @property
    def shape(self):
        return (self.n, self.n)

    @property
    def spectrum_cache(self):
        """The cached spectrum, or ``None`` if not yet computed."""
        return self._spectrum

    @property
    def spectrum(self):
        spec = self._spectrum
        if spec is None:
            spec = np.fft.fft(self._row)
            spec.flags.writeable = False
            self._spectrum = spec
        return spec

    @property
    def T(self):
        """Transpose, itself circulant with first row ``c[(-k) % n]``."""
        return CirculantMatrix(np.roll(self._row[::-1], 1))

    def footprint(self):
        cached = self.n if self._spectrum is not None else 0
        return Footprint(scalars=self.n, cached_complex=cached)

    def matvec(self, x):
        return circ_matvec_fft(self, x)

    def rmatvec(self, x):
        return circ_transpose_matvec(self, x)

    def __matmul__(self, x):
        if isinstance(x, CirculantMatrix):
            return circ_compose(self, x)
        return self.matvec(x)

    def to_dense(self, cap=DENSE_CAP):
        return dense_materialize(self, cap=cap)

    def __repr__(self):
        return f"CirculantMatrix(n={self.n})"


class DiagonalOperator:
    """Diagonal operator stored as its diagonal."""

    __slots__ = ("_diag",)

    def __init__(self, diag):
        d = np.array(diag, dtype=np.float64, copy=True)
        if d.ndim != 1:
            raise DimensionError("diag must be one-dimensional")
        d.flags.writeable = False
        self._diag = d

    @property
    def diag(self):
        return self._diag

    @property
    def n(self):
        return self._diag.shape[0]

    def matvec(self, x):
        return self._diag * _check_len(x, self.n)

    __matmul__ = matvec

    def footprint(self):
        return Footprint(scalars=self.n)

    def to_dense(self, cap=DENSE_CAP):
        if self.n > cap:
            raise DenseCapError(f"n={self.n} exceeds dense cap {cap}")
        return np.diag(self._diag)


class SubsamplingMask:
    """Row selection ``P`` keeping the sorted index set ``omega`` of ``0..n-1``."""

    __slots__ = ("_omega", "_n")

    def __init__(self, omega, n):
        om = np.array(omega, dtype=np.int64, copy=True).reshape(-1)
        n = int(n)
        if n < 1:
            raise ParameterError("ambient dimension n must be positive")
        if om.size:
            if np.any(np.diff(om) <= 0):
                raise ParameterError("omega must be strictly increasing")
            if om[0] < 0 or om[-1] >= n:
                raise ParameterError(f"omega indices must lie in [0, {n})")
        om.flags.writeable = False
        self._omega = om
        self._n = n

    @classmethod
    def full(cls, n):
        return cls(np.arange(n), n)

    @property
    def omega(self):
        return self._omega

    @property
    def n(self):
        return self._n

    @property
    def m(self):
        return self._omega.shape[0]

    @property
    def indicator(self):
        ind = np.zeros(self._n, dtype=bool)
        ind[self._omega] = True
        return ind

    def apply(self, x):
        """``P x``: keep the entries listed in omega."""
        return _check_len(x, self._n)[self._omega]

    def embed(self, r):
        """``P^T r``: scatter an m-vector back into n dimensions."""
        r = _check_len(r, self.m, "r")
        out = np.zeros(self._n)
        out[self._omega] = r
        return out

    def footprint(self):
        return Footprint(scalars=0, indices=self.m)


class PartialCirculantOperator:
    """``A = P C``: an m x n operator made of m selected rows of a circulant."""

    __slots__ = ("circulant", "mask")

    def __init__(self, circulant, mask):
        if circulant.n != mask.n:
            raise DimensionError(
                f"circulant dimension {circulant.n} != mask dimension {mask.n}"
            )
        self.circulant = circulant
        self.mask = mask

    @classmethod
    def full(cls, circulant):
        return cls(circulant, SubsamplingMask.full(circulant.n))

    @property
    def n(self):
        return self.circulant.n

    @property
    def m(self):
        return self.mask.m

    @property
    def shape(self):
        return (self.m, self.n)

    def matvec(self, x):
        return partial_matvec(self, x)

    def rmatvec(self, r):
        return circ_transpose_matvec(self.circulant, self.mask.embed(r))

    __matmul__ = matvec

    def footprint(self):
        fp = self.circulant.footprint()
        return Footprint(fp.scalars, fp.cached_complex, self.m)

    def to_dense(self, cap=DENSE_CAP):
        return dense_materialize(self, cap=cap)

    def __repr__(self):
        return f"PartialCirculantOperator(m={self.m}, n={self.n})"


def circ_matvec_naive(M, x):
    """Shift-indexed product: ``out[i] = sum_j c[(j - i) % n] * x[j]``.

    Only the first row is read; row ``i`` is a contiguous window of the
    doubled first row starting at offset ``n - i``.
    """
    n = M.n
    x = _check_len(x, n)
    doubled = np.concatenate([M.first_row, M.first_row])
    out = np.empty(n)
    out[0] = np.dot(doubled[:n], x)
    for i in range(1, n):
        out[i] = np.dot(doubled[n - i : 2 * n - i], x)
    return out


def circ_matvec_fft(M, x):
    """O(n log n) product through the DFT diagonalisation."""
    n = M.n
    x = _check_len(x, n)
    half = np.conj(M.spectrum[: n // 2 + 1])
    return np.fft.irfft(half * np.fft.rfft(x), n=n)


def circ_transpose_matvec(M, x, method="fft"):
    """``C^T x`` with ``out[i] = sum_j c[(i - j) % n] * x[j]``."""
    n = M.n
    x = _check_len(x, n)
    if method == "fft":
        return np.fft.irfft(M.spectrum[: n // 2 + 1] * np.fft.rfft(x), n=n)
    if method == "naive":
        return circ_matvec_naive(M.T, x)
    raise ParameterError(f"unknown method {method!r}")


def partial_matvec(A, x):
    """``P C x`` for a partial circulant operator; returns an m-vector."""
    x = _check_len(x, A.n)
    return circ_matvec_fft(A.circulant, x)[A.mask.omega]


def regularized_gram_inverse(C, rho, sigma):
    """Circulant inverse of ``rho C^T C + sigma I`` computed in the Fourier domain.

    Parameters
    ----------
    C : CirculantMatrix
    rho, sigma : float
        Non-negative weights, at least one strictly positive.

    Returns
    -------
    CirculantMatrix
        ``B`` with eigenvalues ``1 / (rho |fft(c)|^2 + sigma)``.
    """
    rho = float(rho)
    sigma = float(sigma)
    if rho < 0 or sigma < 0 or not (rho > 0 or sigma > 0):
        raise ParameterError(f"need rho, sigma >= 0 with one positive (got {rho}, {sigma})")
    eig = rho * np.abs(C.spectrum) ** 2 + sigma
    if np.min(np.abs(eig)) < SINGULAR_TOL:
        raise SingularityError("rho C^T C + sigma I is singular to working precision")
    return CirculantMatrix(_real_part(np.fft.ifft(1.0 / eig)))


def mask_gram_inverse(P, rho):
    """Diagonal inverse of ``P^T P + rho I``: ``1/(1+rho)`` on omega, ``1/rho`` off it."""
    rho = float(rho)
    if not rho > 0:
        raise ParameterError(f"rho must be positive, got {rho}")
    return DiagonalOperator(np.where(P.indicator, 1.0 / (1.0 + rho), 1.0 / rho))


def _is_identity(M):
    row = M.first_row
    return row[0] == 1.0 and not np.any(row[1:])


def circ_compose(C, B):
    """Circulant product ``C B``; the defining vector is ``c (*) b`` (circular convolution)."""
    if C.n != B.n:
        raise DimensionError(f"cannot compose n={C.n} with n={B.n}")
    if _is_identity(B):
        return C
    if _is_identity(C):
        return B
    return CirculantMatrix(_real_part(np.fft.ifft(C.spectrum * B.spectrum)))


def spectral_norm(C):
    """``||C||_2 = max_k |fft(c)_k|``; an upper bound on ``||P C||_2`` for partial operators."""
    if isinstance(C, PartialCirculantOperator):
        C = C.circulant
    return float(np.max(np.abs(C.spectrum)))


def dense_materialize(op, cap=DENSE_CAP):
    """Dense matrix of a circulant, partial circulant or diagonal operator (test oracle support)."""
    if isinstance(op, DiagonalOperator):
        return op.to_dense(cap)
    circ = op.circulant if isinstance(op, PartialCirculantOperator) else op
    n = circ.n
    if n > cap:
        raise DenseCapError(f"refusing to materialize n={n} > cap {cap}")
    idx = (np.arange(n)[None, :] - np.arange(n)[:, None]) % n
    if isinstance(op, PartialCirculantOperator):
        idx = idx[op.mask.omega]
    return circ.first_row[idx]


def footprint(op):
    """Analytic storage of any operator in this module."""
    return op.footprint()
