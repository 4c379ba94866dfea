"""Compressed-sensing recovery with circulant sensing matrices."""

from .circulant import (
    CirculantMatrix,
    DiagonalOperator,
    PartialCirculantOperator,
    SubsamplingMask,
    circ_compose,
    circ_matvec_fft,
    circ_matvec_naive,
    circ_transpose_matvec,
    dense_materialize,
    mask_gram_inverse,
    partial_matvec,
    regularized_gram_inverse,
    spectral_norm,
)
from .sensing import gen_circulant_sensing, gen_sparse_signal, make_problem, measure
from .solvers import (
    RecoveryReport,
    SolverConfig,
    admm_dense_run,
    analytic_footprint,
    cadmm_run,
    ista_run,
    lasso_objective,
    mse,
    soft_threshold,
)

__version__ = "0.1.0"

__all__ = [
    "CirculantMatrix",
    "DiagonalOperator",
    "PartialCirculantOperator",
    "RecoveryReport",
    "SolverConfig",
    "SubsamplingMask",
    "admm_dense_run",
    "analytic_footprint",
    "cadmm_run",
    "circ_compose",
    "circ_matvec_fft",
    "circ_matvec_naive",
    "circ_transpose_matvec",
    "dense_materialize",
    "gen_circulant_sensing",
    "gen_sparse_signal",
    "ista_run",
    "lasso_objective",
    "make_problem",
    "mask_gram_inverse",
    "measure",
    "mse",
    "partial_matvec",
    "regularized_gram_inverse",
    "soft_threshold",
    "spectral_norm",
]
