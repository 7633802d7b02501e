"""Separable (Kronecker) within-class covariance estimation.

The within-class covariance of ``vec_t(X)`` is modelled as ``S_L (x) S_R``
with a ``K x K`` row-index factor ``S_L`` and a ``J x J`` column-index factor
``S_R``. Both are estimated by alternating maximum likelihood ("flip-flop"):

    S_L = 1/(nJ) sum_i R_i S_R^{-1} R_i'
    S_R = 1/(nK) sum_i R_i' S_L^{-1} R_i

where ``R_i`` are the trials centered by their own class mean. The scale is
pinned by ``||S_R||_F = 1``.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (
    DegenerateScatterError,
    DimensionError,
    SingularFactorError,
    ValidationError,
)
from .linalg import DEFAULT_FLOOR_RATIO, SpdFactor, kron, spd_factorize

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class EpochSet:
    """Labelled two-class collection of ``K x J`` observation matrices.

    ``trials`` has shape ``(n, K, J)``; ``labels`` holds 1 or 2 per trial.
    """

    trials: np.ndarray
    labels: np.ndarray
    channel_names: Optional[tuple] = None
    row_names: Optional[tuple] = None
    sample_rate_hz: Optional[float] = None
    generator_info: Optional[dict] = field(default=None, compare=False)

    def __post_init__(self):
        trials = np.array(self.trials, dtype=float)
        labels = np.array(self.labels, dtype=np.int64).reshape(-1)
        if trials.ndim != 3:
            raise DimensionError(f"trials must have shape (n, K, J), got {trials.shape}")
        n, k, j = trials.shape
        if k < 1 or j < 1:
            raise DimensionError("K and J must be positive")
        if labels.shape != (n,):
            raise DimensionError(f"expected {n} labels, got {labels.size}")
        bad = ~np.isin(labels, (1, 2))
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise ValidationError(f"label {labels[i]} of trial {i} is not 1 or 2")
        finite = np.isfinite(trials)
        if not finite.all():
            i, r, c = (int(t) for t in np.argwhere(~finite)[0])
            raise ValidationError(f"non-finite value at trial {i}, row {r}, col {c}")
        for name, names, size in (("channel_names", self.channel_names, j),
                                  ("row_names", self.row_names, k)):
            if names is not None:
                if len(names) != size:
                    raise DimensionError(f"{name} has {len(names)} entries, expected {size}")
                object.__setattr__(self, name, tuple(str(s) for s in names))
        trials.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "trials", trials)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.trials.shape[0]

    @property
    def K(self) -> int:
        return self.trials.shape[1]

    @property
    def J(self) -> int:
        return self.trials.shape[2]

    def class_trials(self, c: int) -> np.ndarray:
        return self.trials[self.labels == c]

    def replace_trials(self, trials, row_names=None) -> "EpochSet":
        return EpochSet(trials, self.labels, self.channel_names, row_names,
                        self.sample_rate_hz, self.generator_info)


@dataclass(frozen=True)
class FlipFlopConfig:
    tol: float = 1e-9
    max_iter: int = 100
    ridge: float = 0.0
    floor_ratio: float = DEFAULT_FLOOR_RATIO

    def __post_init__(self):
        if not self.tol > 0:
            raise ValidationError(f"tol must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise ValidationError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.ridge < 0:
            raise ValidationError(f"ridge must be >= 0, got {self.ridge}")


@dataclass(frozen=True, eq=False)
class SeparableCovariance:
    s_l: SpdFactor
    s_r: SpdFactor
    iterations: int = 0
    converged: bool = False
    fixed_point_residual: float = float("nan")

    @property
    def K(self) -> int:
        return self.s_l.dim

    @property
    def J(self) -> int:
        return self.s_r.dim

    def rescaled(self, kappa: float) -> "SeparableCovariance":
        """Return ``(kappa S_L, S_R / kappa)``; the Kronecker product is unchanged."""
        return SeparableCovariance(self.s_l.scaled(kappa), self.s_r.scaled(1.0 / kappa),
                                   self.iterations, self.converged,
                                   self.fixed_point_residual)

    def canonical(self) -> "SeparableCovariance":
        """Rescale so that ``||S_R||_F = 1``."""
        return self.rescaled(float(np.linalg.norm(self.s_r.matrix)))


def class_means(epochs: EpochSet):
    """Per-class entrywise averages.

    Returns ``(mean_1, mean_2, n_1, n_2)``.
    """
    out = []
    for c in (1, 2):
        x = epochs.class_trials(c)
        if x.shape[0] == 0:
            raise ValidationError(f"class {c} has no trials")
        out.append(x)
    x1, x2 = out
    return x1.mean(axis=0), x2.mean(axis=0), x1.shape[0], x2.shape[0]


def centered_trials(epochs: EpochSet) -> np.ndarray:
    """Trials minus their own class mean, in stored order."""
    mean1, mean2, _, _ = class_means(epochs)
    return epochs.trials - np.where(epochs.labels[:, None, None] == 1, mean1, mean2)


def _row_update(resid: np.ndarray, r_inv_sqrt: np.ndarray) -> np.ndarray:
    # 1/(nJ) sum_i R_i S_R^{-1} R_i'
    n, k, j = resid.shape
    w = (resid @ r_inv_sqrt).transpose(1, 0, 2).reshape(k, n * j)
    s = w @ w.T / (n * j)
    return 0.5 * (s + s.T)


def _col_update(resid: np.ndarray, l_inv_sqrt: np.ndarray) -> np.ndarray:
    # 1/(nK) sum_i R_i' S_L^{-1} R_i
    n, k, j = resid.shape
    w = (l_inv_sqrt @ resid).transpose(2, 0, 1).reshape(j, n * k)
    s = w @ w.T / (n * k)
    return 0.5 * (s + s.T)


def _factor_for_inversion(a: np.ndarray, name: str, config: FlipFlopConfig) -> SpdFactor:
    if config.ridge > 0:
        return spd_factorize(a + config.ridge * np.eye(a.shape[0]), config.floor_ratio)
    w = np.linalg.eigvalsh(a)
    threshold = config.floor_ratio * w[-1]
    if not w[-1] > 0 or w[0] <= threshold:
        raise SingularFactorError(name, float(w[0]), float(threshold))
    return spd_factorize(a, config.floor_ratio)


def _rel_change(new: np.ndarray, old: np.ndarray) -> float:
    return float(np.linalg.norm(new - old) / np.linalg.norm(new))


def fixed_point_residual(resid: np.ndarray, s_l: np.ndarray, s_r: np.ndarray,
                         ridge: float = 0.0) -> float:
    """Largest relative Frobenius residual of the two update equations at a pair.

    With ``ridge > 0`` the right-hand sides use the ridged inverses, as the
    iteration does.
    """
    l_new = _row_update(resid, spd_factorize(s_r + ridge * np.eye(len(s_r)), 0.0).inv_sqrt)
    r_new = _col_update(resid, spd_factorize(s_l + ridge * np.eye(len(s_l)), 0.0).inv_sqrt)
    return max(_rel_change(l_new, s_l) if np.linalg.norm(l_new) else np.inf,
               _rel_change(r_new, s_r) if np.linalg.norm(r_new) else np.inf)


def _check_sample_size(n: int, k: int, j: int) -> None:
    if n * j <= k or n * k <= j:
        warnings.warn(
            f"n={n}, K={k}, J={j}: n*J <= K or n*K <= J, the covariance factors "
            "may not be positive definite",
            RuntimeWarning,
            stacklevel=3,
        )


def flip_flop(
    epochs: EpochSet,
    config: FlipFlopConfig = FlipFlopConfig(),
    callback: Optional[Callable[[int, np.ndarray, np.ndarray], None]] = None,
) -> SeparableCovariance:
    """Estimate the row and column covariance factors by alternating updates.

    Each sweep updates ``S_L`` from residuals whitened by the current ``S_R``,
    then ``S_R`` from residuals whitened by the new ``S_L``, then rescales so
    ``||S_R||_F = 1`` (the scale is moved into ``S_L``). Iteration starts from
    ``S_R = I / sqrt(J)`` and stops once both factors change by less than
    ``config.tol`` relative, or after ``config.max_iter`` sweeps.

    ``callback(sweep, s_l, s_r)`` is invoked after every normalized sweep.
    """
    resid = centered_trials(epochs)
    n, k, j = resid.shape
    if max(np.count_nonzero(epochs.labels == 1), np.count_nonzero(epochs.labels == 2)) < 2:
        raise DegenerateScatterError("need at least one class with two or more trials")
    if not np.any(resid):
        raise DegenerateScatterError("within-class scatter is zero")
    _check_sample_size(n, k, j)

    s_r = np.eye(j) / np.sqrt(j)
    s_l = np.zeros((k, k))
    r_fac = _factor_for_inversion(s_r, "S_R", config)
    converged = False
    sweep = 0
    for sweep in range(1, config.max_iter + 1):
        l_next = _row_update(resid, r_fac.inv_sqrt)
        l_fac = _factor_for_inversion(l_next, "S_L", config)
        r_next = _col_update(resid, l_fac.inv_sqrt)
        scale = np.linalg.norm(r_next)
        if scale == 0:
            raise DegenerateScatterError("column covariance update vanished")
        r_next = r_next / scale
        l_next = l_next * scale

        change = max(_rel_change(l_next, s_l), _rel_change(r_next, s_r))
        s_l, s_r = l_next, r_next
        if callback is not None:
            callback(sweep, s_l, s_r)
        logger.debug("flip-flop sweep %d: relative change %.3e", sweep, change)
        r_fac = _factor_for_inversion(s_r, "S_R", config)
        if change < config.tol:
            converged = True
            break

    l_fac = spd_factorize(s_l, config.floor_ratio)
    r_fac = spd_factorize(s_r, config.floor_ratio)
    return SeparableCovariance(
        s_l=l_fac,
        s_r=r_fac,
        iterations=sweep,
        converged=converged,
        fixed_point_residual=fixed_point_residual(resid, l_fac.matrix, r_fac.matrix,
                                                  config.ridge),
    )


def assemble_full(cov: SeparableCovariance) -> np.ndarray:
    """Dense ``KJ x KJ`` covariance ``S_L (x) S_R`` (ordered like ``vec_t``)."""
    return kron(cov.s_l.matrix, cov.s_r.matrix)


def matrix_normal_loglik(epochs: EpochSet, cov: SeparableCovariance) -> float:
    """Pooled log-likelihood of the class-centered trials under N(0, S_L (x) S_R).

    Uses the factor log-determinants, never the full ``KJ x KJ`` matrix.
    """
    resid = centered_trials(epochs)
    n, k, j = resid.shape
    if cov.s_l.dim != k or cov.s_r.dim != j:
        raise DimensionError("covariance factors do not match the epoch dimensions")
    w = cov.s_l.inv_sqrt @ resid @ cov.s_r.inv_sqrt
    quad = float(np.sum(w * w))
    logdet = j * cov.s_l.logdet() + k * cov.s_r.logdet()
    return -0.5 * (n * k * j * np.log(2.0 * np.pi) + n * logdet + quad)


def covariance_from_matrices(s_l, s_r, floor_ratio: float = DEFAULT_FLOOR_RATIO,
                             **diagnostics) -> SeparableCovariance:
    return SeparableCovariance(spd_factorize(s_l, floor_ratio),
                               spd_factorize(s_r, floor_ratio), **diagnostics)
