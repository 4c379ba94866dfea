"""Compressed deblurring: fold a 1-D box blur into a partial circulant sensing operator.

The image is flattened row-major into a vector of length ``width * height``
and blurred along that vector.  With ``B`` the blur circulant and ``C`` a
random sensing circulant, ``A = P (C B)`` is again partial circulant, so the
sharp image is recovered directly from the compressed blurred measurements
with circulant ADMM.
"""

from dataclasses import dataclass, field

import numpy as np

from .circulant import (
    CirculantMatrix,
    PartialCirculantOperator,
    circ_compose,
)
from .errors import DimensionError, ParameterError
from .sensing import _subset, _uniforms, gen_circulant_sensing
from .solvers import SolverConfig, cadmm_run

# stops on the iterate change; ground truth is only used for statistics
DEBLUR_DEFAULTS = SolverConfig(alpha=1e-2, max_iter=5000, target_mse=1e-7)


@dataclass
class GrayImage:
    """Row-major grayscale raster with intensities in [0, 1]."""

    width: int
    height: int
    pixels: np.ndarray

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.float64).reshape(-1)
        if self.width < 1 or self.height < 1:
            raise ParameterError("image dimensions must be positive")
        if self.pixels.shape[0] != self.width * self.height:
            raise DimensionError(
                f"{self.pixels.shape[0]} pixels for a {self.width}x{self.height} image"
            )

    @classmethod
    def from_vector(cls, x, width, height):
        """Build an image from an unclamped solver output, clamping to [0, 1]."""
        return cls(width, height, np.clip(np.asarray(x, dtype=np.float64), 0.0, 1.0))

    @property
    def n(self):
        return self.width * self.height

    def as_array(self):
        return self.pixels.reshape(self.height, self.width)


def star_field(width, height, fraction=0.1, seed=0, low=0.2, high=1.0):
    """Synthetic night sky: ``round(fraction * n)`` point sources on black."""
    n = width * height
    k = int(round(fraction * n))
    draw = _uniforms(seed, 3)
    support = _subset(draw, n, k)
    pixels = np.zeros(n)
    pixels[support] = low + (high - low) * draw(k)
    return GrayImage(width, height, pixels)


def blur_matrix(n, L):
    """Box blur of order L: first row has L entries ``1/L`` then zeros.

    Row ``i`` averages ``x[i], ..., x[i + L - 1]`` cyclically; every row sums
    to one, so the mean of any vector is preserved.
    """
    n, L = int(n), int(L)
    if not 1 <= L <= n:
        raise ParameterError(f"blur order must satisfy 1 <= L <= n, got L={L}, n={n}")
    row = np.zeros(n)
    row[:L] = 1.0 / L
    return CirculantMatrix(row)


def compose_sensing(C, B, mask):
    """``P (C B)`` as a partial circulant operator."""
    if C.n != B.n or C.n != mask.n:
        raise DimensionError(f"dimensions differ: C {C.n}, B {B.n}, mask {mask.n}")
    return PartialCirculantOperator(circ_compose(C, B), mask)


@dataclass
class DeblurResult:
    image: GrayImage
    report: object
    error_map: np.ndarray = None
    stats: dict = field(default_factory=dict)


def deblur_recover(y, C, B, mask, cfg=None, width=None, height=None, x_true=None):
    """Recover a sharp image from ``y = P C B x*`` with circulant ADMM.

    ``width``/``height`` default to a single row.  When ``x_true`` is given the
    result carries the pixel-wise absolute error normalised by the mean true
    intensity, and ``stats`` lists MSE, normalised MSE and the error-map mean.
    """
    cfg = cfg or DEBLUR_DEFAULTS
    A = compose_sensing(C, B, mask)
    width = A.n if width is None else int(width)
    height = 1 if height is None else int(height)
    if width * height != A.n:
        raise DimensionError(f"{width}x{height} image does not have n={A.n} pixels")
    report = cadmm_run(y, A, cfg)
    image = GrayImage.from_vector(report.final_x, width, height)
    result = DeblurResult(image=image, report=report)
    stats = {
        "n": A.n,
        "m": A.m,
        "iterations": report.iterations,
        "setup_s": report.setup_seconds,
        "total_s": report.total_seconds,
    }
    if x_true is not None:
        x_true = np.asarray(x_true, dtype=np.float64)
        diff = image.pixels - x_true
        err = float(np.dot(diff, diff) / diff.size)
        mean = float(np.mean(x_true))
        scale = mean if mean > 0 else 1.0
        result.error_map = np.abs(diff) / scale
        stats.update(
            mse=err,
            nmse=err / scale**2,
            error_map_mean=float(np.mean(result.error_map)),
            true_mean=mean,
        )
    result.stats = stats
    return result


def deblur_pipeline(image, L=5, m_ratio=0.5, cfg=None, seed=0):
    """Blur, compressively sample and recover ``image``; returns a DeblurResult.

    The sensing circulant and the row subset come from ``seed``; the blur is
    folded into the operator, so the blurred image is never formed explicitly.
    """
    n = image.n
    if not 0 < m_ratio <= 1:
        raise ParameterError(f"m_ratio must lie in (0, 1], got {m_ratio}")
    m = max(1, int(n * m_ratio))
    sensing = gen_circulant_sensing(n, m, seed)
    B = blur_matrix(n, L)
    A = compose_sensing(sensing.circulant, B, sensing.mask)
    y = A.matvec(image.pixels)
    result = deblur_recover(
        y, sensing.circulant, B, sensing.mask, cfg,
        width=image.width, height=image.height, x_true=image.pixels,
    )
    result.stats.update(L=L, m_ratio=m_ratio, seed=seed)
    return result


def blurred(image, L):
    """The blurred (uncompressed) image, for inspection."""
    B = blur_matrix(image.n, L)
    return GrayImage.from_vector(B.matvec(image.pixels), image.width, image.height)

