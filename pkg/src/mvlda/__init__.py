"""Descriptive linear discriminant analysis for matrix-valued observations.

Two-class data ``X_i`` (``K x J``) are modelled with a separable within-class
covariance ``S_L (x) S_R``. The class-mean difference is decomposed by an SVD
in which the column and row spaces carry the Mahalanobis metrics
``S_L^{-1}`` and ``S_R^{-1}``.
"""

__version__ = "0.1.0"

from .covariance import (
    EpochSet,
    FlipFlopConfig,
    SeparableCovariance,
    assemble_full,
    class_means,
    flip_flop,
    matrix_normal_loglik,
)
from .discriminant import (
    DiscriminantModel,
    approx_error,
    col_coordinates,
    fit,
    mahalanobis_decomposition,
    rank_r_reconstruct,
    row_coordinates,
    scores_vec,
)
from .errors import MvldaError, NumericalError, ValidationError
from .io import ModelFile, load_epochs, load_model, read_bundle, save_model, write_bundle
from .linalg import SpdFactor, kron, matrix_inner, metric_svd, spd_factorize, vec_t

__all__ = [
    "DiscriminantModel",
    "EpochSet",
    "FlipFlopConfig",
    "ModelFile",
    "MvldaError",
    "NumericalError",
    "SeparableCovariance",
    "SpdFactor",
    "ValidationError",
    "approx_error",
    "assemble_full",
    "class_means",
    "col_coordinates",
    "fit",
    "flip_flop",
    "kron",
    "load_epochs",
    "load_model",
    "mahalanobis_decomposition",
    "matrix_inner",
    "matrix_normal_loglik",
    "metric_svd",
    "rank_r_reconstruct",
    "read_bundle",
    "row_coordinates",
    "save_model",
    "scores_vec",
    "spd_factorize",
    "vec_t",
    "write_bundle",
]
