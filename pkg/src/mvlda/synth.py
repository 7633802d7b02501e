"""Seeded matrix-normal sampling and a dense reference discriminant.

The dense reference works on ``KJ``-vectors and the explicit ``KJ x KJ``
covariance; it is only meant for small problems and for cross-checking the
factorized code path.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .covariance import EpochSet, FlipFlopConfig, assemble_full, class_means, flip_flop
from .errors import DimensionError, ValidationError
from .linalg import SpdFactor, default_rank_tol, spd_factorize, vec_t

GENERATOR = "numpy.random.PCG64"
DENSE_LIMIT = 400


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def ar1_covariance(size: int, rho: float) -> np.ndarray:
    """Toeplitz matrix ``rho**|i-j|``."""
    if not -1 < rho < 1:
        raise ValidationError(f"rho must lie in (-1, 1), got {rho}")
    idx = np.arange(size)
    return rho ** np.abs(idx[:, None] - idx[None, :])


def random_spd(size: int, rng: np.random.Generator, condition: float = 10.0) -> np.ndarray:
    """Random SPD matrix with eigenvalues spread log-uniformly over ``[1, condition]``."""
    q, r = np.linalg.qr(rng.standard_normal((size, size)))
    q = q * np.sign(np.diag(r))
    w = np.exp(rng.uniform(0.0, np.log(condition), size))
    a = (q * w) @ q.T
    return 0.5 * (a + a.T)


def _orthonormal_columns(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((rows, cols)))
    return q * np.where(np.diag(r) < 0, -1.0, 1.0)


def planted_difference(lambdas: Sequence[float], sigma_l: SpdFactor, sigma_r: SpdFactor,
                       rng: np.random.Generator) -> np.ndarray:
    """Mean difference ``sum_q sqrt(lam_q) u_q v_q'`` with random metric-orthonormal axes.

    ``u_q`` are orthonormal under ``sigma_l^{-1}`` and ``v_q`` under
    ``sigma_r^{-1}``, so the population discriminant eigenvalues are exactly
    ``lambdas``.
    """
    lam = np.asarray(lambdas, dtype=float)
    k, j = sigma_l.dim, sigma_r.dim
    if lam.size > min(k, j):
        raise ValidationError(f"at most min(K, J) = {min(k, j)} planted eigenvalues")
    if np.any(lam <= 0):
        raise ValidationError("planted eigenvalues must be positive")
    u = sigma_l.sqrt @ _orthonormal_columns(k, lam.size, rng)
    v = sigma_r.sqrt @ _orthonormal_columns(j, lam.size, rng)
    return (u * np.sqrt(lam)) @ v.T


@dataclass(frozen=True, eq=False)
class MatrixNormalSpec:
    mu1: np.ndarray
    mu2: np.ndarray
    sigma_l: SpdFactor
    sigma_r: SpdFactor
    n1: int
    n2: int
    seed: int = 0

    def __post_init__(self):
        k, j = self.sigma_l.dim, self.sigma_r.dim
        for name in ("mu1", "mu2"):
            mu = np.asarray(getattr(self, name), dtype=float)
            if mu.shape != (k, j):
                raise DimensionError(f"{name} must be {k}x{j}, got {mu.shape}")
            object.__setattr__(self, name, mu)
        if self.n1 < 1 or self.n2 < 1:
            raise ValidationError("each class needs at least one trial")
        if self.seed < 0:
            raise ValidationError("seed must be non-negative")


def sample_matrix_normal(spec: MatrixNormalSpec, channel_names=None, row_names=None,
                         sample_rate_hz: Optional[float] = None,
                         generator_info: Optional[dict] = None) -> EpochSet:
    """Draw ``mu_c + sqrt(Sigma_L) Z sqrt(Sigma_R)`` trials, class 1 first.

    ``Z`` has independent standard normal entries from a PCG64 stream seeded
    with ``spec.seed``; the same spec always yields identical trials.
    """
    rng = make_rng(spec.seed)
    k, j = spec.sigma_l.dim, spec.sigma_r.dim
    n = spec.n1 + spec.n2
    z = rng.standard_normal((n, k, j))
    trials = spec.sigma_l.sqrt @ z @ spec.sigma_r.sqrt
    trials[:spec.n1] += spec.mu1
    trials[spec.n1:] += spec.mu2
    labels = np.repeat([1, 2], [spec.n1, spec.n2])
    return EpochSet(trials, labels, channel_names, row_names, sample_rate_hz, generator_info)


class DenseDiscriminant(NamedTuple):
    lam: np.ndarray
    axes: np.ndarray
    total: float


def brute_force_discriminant(epochs: EpochSet, config: FlipFlopConfig = FlipFlopConfig(),
                             rank_tol: Optional[float] = None) -> DenseDiscriminant:
    """Reference discriminant on the explicit ``KJ x KJ`` covariance.

    Whitens ``vec_t(delta)`` by a square root of the dense covariance
    (computed from its own eigendecomposition), folds it back to ``K x J``
    and takes ordinary singular values. ``axes`` rows are the unit vectors
    ``u_q (x) v_q`` under the inverse covariance.
    """
    k, j = epochs.K, epochs.J
    if k * j > DENSE_LIMIT:
        raise DimensionError(f"K*J = {k * j} exceeds the dense limit of {DENSE_LIMIT}")
    cov = flip_flop(epochs, config)
    full = assemble_full(cov)
    w, q = np.linalg.eigh(full)
    root = (q * np.sqrt(w)) @ q.T
    inv_root = (q / np.sqrt(w)) @ q.T

    mean1, mean2, _, _ = class_means(epochs)
    d = vec_t(mean1 - mean2)
    total = float(d @ np.linalg.solve(full, d))
    white = (inv_root @ d).reshape(k, j)
    left, s, right_t = np.linalg.svd(white, full_matrices=False)
    tol = default_rank_tol(k, j) if rank_tol is None else rank_tol
    rank = 0 if s.size == 0 or s[0] == 0 else int(np.count_nonzero(s > tol * s[0]))
    axes = np.array([root @ np.kron(left[:, i], right_t[i]) for i in range(rank)])
    return DenseDiscriminant(s[:rank] ** 2, axes.reshape(rank, k * j), total)


def erp_templates(times_ms: np.ndarray, n_channels: int, rng: np.random.Generator):
    """Temporal shapes and channel weights of a negative early wave and a late positive wave."""
    early = -np.exp(-0.5 * ((times_ms - 150.0) / 30.0) ** 2)
    late = np.exp(-0.5 * ((times_ms - 380.0) / 80.0) ** 2)
    pos = np.linspace(0.0, 1.0, n_channels)
    # early wave strongest at the back, late wave centred; mild random jitter
    w_early = np.exp(-0.5 * ((pos - 0.85) / 0.2) ** 2) + 0.05 * rng.standard_normal(n_channels)
    w_late = np.exp(-0.5 * ((pos - 0.5) / 0.25) ** 2) + 0.05 * rng.standard_normal(n_channels)
    return np.stack([early, late]), np.stack([w_early, w_late])


def sample_erp_epochs(n1: int, n2: int, n_channels: int = 8, seed: int = 0,
                      n_samples: int = 1000, sample_rate_hz: float = 1000.0,
                      onset_ms: float = -100.0, amplitude: float = 2.0,
                      rho_time: float = 0.95, rho_space: float = 0.4,
                      noise_scale: float = 1.0) -> EpochSet:
    """Time-domain epochs with evoked waves in class 1 and separable noise.

    Rows are time samples starting at ``onset_ms`` relative to the stimulus,
    columns are channels. Class 2 trials carry noise only.
    """
    rng = make_rng(seed)
    times = onset_ms + np.arange(n_samples) * 1000.0 / sample_rate_hz
    shapes, weights = erp_templates(times, n_channels, rng)
    signal = amplitude * shapes.T @ weights
    sigma_t = spd_factorize(noise_scale * ar1_covariance(n_samples, rho_time))
    sigma_s = ar1_covariance(n_channels, rho_space)
    sigma_s = spd_factorize(sigma_s / np.linalg.norm(sigma_s))
    spec = MatrixNormalSpec(signal, np.zeros_like(signal), sigma_t, sigma_s, n1, n2,
                            int(rng.integers(2**32)))
    info = {"generator": GENERATOR, "kind": "erp", "seed": seed, "n1": n1, "n2": n2,
            "n_channels": n_channels, "n_samples": n_samples,
            "sample_rate_hz": sample_rate_hz, "onset_ms": onset_ms,
            "amplitude": amplitude, "rho_time": rho_time, "rho_space": rho_space,
            "noise_scale": noise_scale}
    names = [f"ch{i + 1:02d}" for i in range(n_channels)]
    rows = [f"{t:g}ms" for t in times]
    return sample_matrix_normal(spec, names, rows, sample_rate_hz, info)
