"""Descriptive two-class discriminant analysis of matrix-valued observations.

The class-mean difference ``delta = mean_1 - mean_2`` is decomposed as

    delta = sum_q sqrt(lam_q) u_q v_q'

with ``u_q`` orthonormal under ``D = S_L^{-1}`` and ``v_q`` orthonormal under
``M = S_R^{-1}``. The ``lam_q`` split the squared Mahalanobis distance between
the class means, and ``u_q (x) v_q`` are orthonormal axes of ``R^{KJ}`` under
``(S_L (x) S_R)^{-1}``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .covariance import EpochSet, SeparableCovariance, class_means
from .errors import DimensionError, NumericalError, ValidationError
from .linalg import SpdFactor, matrix_norm2, metric_svd


@dataclass(frozen=True, eq=False)
class DiscriminantModel:
    mean1: np.ndarray
    mean2: np.ndarray
    metric_m: SpdFactor
    metric_d: SpdFactor
    u: np.ndarray
    v: np.ndarray
    lam: np.ndarray
    n1: int
    n2: int

    @property
    def K(self) -> int:
        return self.mean1.shape[0]

    @property
    def J(self) -> int:
        return self.mean1.shape[1]

    @property
    def Q(self) -> int:
        return self.lam.size

    @property
    def delta(self) -> np.ndarray:
        return self.mean1 - self.mean2

    @property
    def s_l(self) -> np.ndarray:
        return self.metric_d.inverse

    @property
    def s_r(self) -> np.ndarray:
        return self.metric_m.inverse


def fit_means(mean1, mean2, cov: SeparableCovariance, n1: int = 0, n2: int = 0,
              rank_tol: Optional[float] = None) -> DiscriminantModel:
    """Build a model from given class means and covariance factors.

    The factors are first put in canonical form (``||S_R||_F = 1``), so the
    model does not depend on how the scale is split between them.
    """
    mean1 = np.asarray(mean1, dtype=float)
    mean2 = np.asarray(mean2, dtype=float)
    if mean1.shape != mean2.shape or mean1.shape != (cov.K, cov.J):
        raise DimensionError(
            f"means {mean1.shape}/{mean2.shape} do not match covariance ({cov.K}, {cov.J})"
        )
    cov = cov.canonical()
    m = cov.s_r.inverted()
    d = cov.s_l.inverted()
    svd = metric_svd(mean1 - mean2, m, d, rank_tol)
    for a in (mean1, mean2, svd.u, svd.v, svd.lam):
        a.setflags(write=False)
    return DiscriminantModel(mean1, mean2, m, d, svd.u, svd.v, svd.lam, int(n1), int(n2))


def fit(epochs: EpochSet, cov: SeparableCovariance,
        rank_tol: Optional[float] = None) -> DiscriminantModel:
    """Metric SVD of the empirical class-mean difference.

    Uses ``M = S_R^{-1}`` on the row space and ``D = S_L^{-1}`` on the column
    space. ``rank_tol`` defaults to ``max(K, J) * 1e-12``.
    """
    if (epochs.K, epochs.J) != (cov.K, cov.J):
        raise DimensionError(
            f"epochs are {epochs.K}x{epochs.J} but covariance is {cov.K}x{cov.J}"
        )
    mean1, mean2, n1, n2 = class_means(epochs)
    return fit_means(mean1, mean2, cov, n1, n2, rank_tol)


def _check_obs(x, model: DiscriminantModel) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-2:] != (model.K, model.J):
        raise DimensionError(f"expected {model.K}x{model.J} observations, got {x.shape}")
    return x


def scores_vec(x, model: DiscriminantModel) -> np.ndarray:
    """Coordinates of ``vec_t(x)`` on the axes ``u_q (x) v_q``.

    Component ``q`` is ``u_q' D x M v_q``. ``x`` may also be a stack of
    shape ``(n, K, J)``, giving an ``(n, Q)`` array.
    """
    x = _check_obs(x, model)
    du = model.metric_d.matrix @ model.u
    mv = model.metric_m.matrix @ model.v
    return np.einsum("kq,...kj,jq->...q", du, x, mv)


def mahalanobis_decomposition(model: DiscriminantModel):
    """Return ``(lam, total)`` with ``total = sum(lam) = ||delta||^2_{M,D}``.

    Raises NumericalError if the two routes disagree beyond 1e-8 relative.
    """
    total = float(np.sum(model.lam))
    direct = matrix_norm2(model.delta, model.metric_m, model.metric_d)
    if abs(total - direct) > 1e-8 * abs(direct):
        raise NumericalError(
            f"eigenvalue sum {total!r} disagrees with Mahalanobis distance {direct!r}"
        )
    return model.lam.copy(), total


def _check_r(model: DiscriminantModel, r: int) -> int:
    if not 0 <= r <= model.Q:
        raise ValidationError(f"r must lie in [0, {model.Q}], got {r}")
    return int(r)


def approx_error(model: DiscriminantModel, r: int) -> float:
    """Squared Mahalanobis norm of the mean difference left out by the first ``r`` axes."""
    r = _check_r(model, r)
    return float(np.sum(model.lam[r:]))


def rank_r_reconstruct(model: DiscriminantModel, r: int) -> np.ndarray:
    r = _check_r(model, r)
    return (model.u[:, :r] * np.sqrt(model.lam[:r])) @ model.v[:, :r].T


def row_coordinates(x, model: DiscriminantModel) -> np.ndarray:
    """Coordinates ``x M v_q`` of the K rows of ``x`` (a ``K x Q`` array)."""
    x = _check_obs(x, model)
    return x @ model.metric_m.matrix @ model.v


def col_coordinates(x, model: DiscriminantModel) -> np.ndarray:
    """Coordinates ``x' D u_q`` of the J columns of ``x`` (a ``J x Q`` array)."""
    x = _check_obs(x, model)
    return np.swapaxes(x, -1, -2) @ model.metric_d.matrix @ model.u
