"""Orthogonal discrete wavelet transform and coefficient selection.

Epochs are stored as ``T x J`` matrices (time samples by channels). Each
channel is zero-padded (or periodically extended) to ``padded_length`` and
transformed with a periodized Daubechies filter bank. Coefficients are laid
out as ``[a_L, d_L, d_{L-1}, ..., d_1]`` for ``L`` levels.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np

from .covariance import EpochSet
from .discriminant import DiscriminantModel, row_coordinates
from .errors import DimensionError, ValidationError

BOUNDARIES = ("zero-pad", "periodic")


@lru_cache(maxsize=None)
def daubechies_filter(taps: int) -> np.ndarray:
    """Low-pass Daubechies analysis filter with ``taps`` coefficients.

    Obtained by spectral factorization of the maximally flat half-band
    polynomial, keeping the roots inside the unit circle. Normalized so that
    the coefficients sum to ``sqrt(2)``; ``taps=8`` gives the filter with
    four vanishing moments (0.2304, 0.7148, 0.6309, ...).
    """
    if taps < 2 or taps % 2:
        raise ValidationError(f"filter length must be a positive even integer, got {taps}")
    n = taps // 2
    coeffs = [comb(n - 1 + k, k) for k in range(n)]
    poly = np.array([1.0 + 0j])
    for _ in range(n):
        poly = np.convolve(poly, [1.0, 1.0])
    for y in np.roots(coeffs[::-1]) if n > 1 else ():
        # y = (2 - z - 1/z) / 4  <=>  z^2 - (2 - 4y) z + 1 = 0
        z = np.roots([1.0, -(2.0 - 4.0 * y), 1.0])
        poly = np.convolve(poly, [1.0, -z[np.argmin(np.abs(z))]])
    h = np.real(poly)
    h = h * (np.sqrt(2.0) / h.sum())
    h.setflags(write=False)
    return h


def quadrature_mirror(h: np.ndarray) -> np.ndarray:
    """High-pass filter ``g[n] = (-1)^n h[L-1-n]``."""
    g = h[::-1].copy()
    g[1::2] *= -1.0
    return g


@dataclass(frozen=True)
class WaveletConfig:
    filter_taps: int = 8
    levels: int = 5
    boundary: str = "zero-pad"
    padded_length: int = 1024

    def __post_init__(self):
        if self.filter_taps < 2 or self.filter_taps % 2:
            raise ValidationError(f"filter_taps must be even and positive, got {self.filter_taps}")
        if self.levels < 1:
            raise ValidationError(f"levels must be >= 1, got {self.levels}")
        if self.boundary not in BOUNDARIES:
            raise ValidationError(f"boundary must be one of {BOUNDARIES}, got {self.boundary!r}")
        p = self.padded_length
        if p < 2 or p & (p - 1):
            raise ValidationError(f"padded_length must be a power of two, got {p}")
        if p % (1 << self.levels):
            raise ValidationError(f"padded_length {p} is not divisible by 2^{self.levels}")

    @property
    def lowpass(self) -> np.ndarray:
        return daubechies_filter(self.filter_taps)

    @property
    def highpass(self) -> np.ndarray:
        return quadrature_mirror(self.lowpass)

    def to_dict(self) -> dict:
        return {"filter_taps": self.filter_taps, "levels": self.levels,
                "boundary": self.boundary, "padded_length": self.padded_length}


def coefficient_labels(config: WaveletConfig) -> list:
    """Names ``a5[0], ..., d5[k], ..., d1[k]`` for every coefficient index."""
    size = config.padded_length >> config.levels
    labels = [f"a{config.levels}[{i}]" for i in range(size)]
    for level in range(config.levels, 0, -1):
        size = config.padded_length >> level
        labels += [f"d{level}[{i}]" for i in range(size)]
    return labels


def pad_signal(signal, config: WaveletConfig) -> np.ndarray:
    """Extend ``signal`` along axis 0 to ``padded_length``."""
    x = np.asarray(signal, dtype=float)
    length = x.shape[0]
    if length > config.padded_length:
        raise DimensionError(
            f"signal length {length} exceeds padded_length {config.padded_length}"
        )
    if length == 0:
        raise DimensionError("empty signal")
    if config.boundary == "periodic":
        return x[np.arange(config.padded_length) % length]
    out = np.zeros((config.padded_length,) + x.shape[1:])
    out[:length] = x
    return out


def _taps_index(n: int, taps: int) -> np.ndarray:
    return (2 * np.arange(n // 2)[:, None] + np.arange(taps)[None, :]) % n


def _analysis_step(x: np.ndarray, h: np.ndarray, g: np.ndarray):
    windows = x[_taps_index(x.shape[0], h.size)]
    return np.tensordot(h, windows, axes=(0, 1)), np.tensordot(g, windows, axes=(0, 1))


def _synthesis_step(a: np.ndarray, d: np.ndarray, h: np.ndarray, g: np.ndarray) -> np.ndarray:
    n = 2 * a.shape[0]
    idx = _taps_index(n, h.size)
    shape = (1, -1) + (1,) * (a.ndim - 1)
    contrib = a[:, None] * h.reshape(shape) + d[:, None] * g.reshape(shape)
    out = np.zeros((n,) + a.shape[1:])
    np.add.at(out, idx, contrib)
    return out


def dwt_forward(signal, config: WaveletConfig = WaveletConfig()) -> np.ndarray:
    """Multi-level orthogonal DWT along axis 0 (extra axes are transformed independently)."""
    a = pad_signal(signal, config)
    h, g = config.lowpass, config.highpass
    details = []
    for _ in range(config.levels):
        a, d = _analysis_step(a, h, g)
        details.append(d)
    return np.concatenate([a] + details[::-1], axis=0)


def dwt_inverse(coeffs, config: WaveletConfig = WaveletConfig()) -> np.ndarray:
    """Inverse of :func:`dwt_forward`; returns the full padded-length signal."""
    c = np.asarray(coeffs, dtype=float)
    if c.ndim == 0 or c.shape[0] != config.padded_length:
        raise DimensionError(
            f"expected {config.padded_length} coefficients, got {c.shape[:1]}"
        )
    h, g = config.lowpass, config.highpass
    size = config.padded_length >> config.levels
    a = c[:size]
    pos = size
    for _ in range(config.levels):
        d = c[pos:pos + size]
        a = _synthesis_step(a, d, h, g)
        pos += size
        size *= 2
    return a


@dataclass(frozen=True, eq=False)
class CoefficientMask:
    total_len: int
    kept_indices: np.ndarray
    statistic: np.ndarray
    threshold: float

    def __post_init__(self):
        kept = np.array(self.kept_indices, dtype=np.int64).reshape(-1)
        stat = np.array(self.statistic, dtype=float).reshape(-1)
        if stat.size != self.total_len:
            raise DimensionError("statistic length differs from total_len")
        if kept.size and (np.any(np.diff(kept) <= 0) or kept[0] < 0
                          or kept[-1] >= self.total_len):
            raise ValidationError("kept_indices must be strictly increasing and in range")
        kept.setflags(write=False)
        stat.setflags(write=False)
        object.__setattr__(self, "kept_indices", kept)
        object.__setattr__(self, "statistic", stat)

    @property
    def size(self) -> int:
        return self.kept_indices.size

    def select(self, coeffs: np.ndarray) -> np.ndarray:
        """Keep the masked rows (axis 0, or axis -2 for stacked trials)."""
        return np.take(coeffs, self.kept_indices, axis=-2 if coeffs.ndim > 2 else 0)

    def scatter(self, values) -> np.ndarray:
        """Place kept-row values back into a zero full-length vector (axis 0)."""
        values = np.asarray(values, dtype=float)
        if values.shape[0] != self.size:
            raise DimensionError(f"expected {self.size} values, got {values.shape[0]}")
        out = np.zeros((self.total_len,) + values.shape[1:])
        out[self.kept_indices] = values
        return out


def select_coefficients(transformed_trials) -> CoefficientMask:
    """Keep the coefficients whose mean magnitude exceeds the average of those means.

    ``transformed_trials`` is a sequence (or ``(n, P)`` array) of coefficient
    vectors of equal length. The per-index statistic is the mean absolute
    value over all vectors; indices strictly above its average are kept.
    """
    x = np.asarray(transformed_trials, dtype=float)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValidationError("need a non-empty set of equal-length coefficient vectors")
    stat = np.mean(np.abs(x), axis=0)
    threshold = float(np.mean(stat))
    return CoefficientMask(x.shape[1], np.flatnonzero(stat > threshold), stat, threshold)


def subtract_baseline(trials: np.ndarray, samples: int) -> np.ndarray:
    """Remove the per-channel mean of the first ``samples`` time points."""
    if samples <= 0:
        return trials
    if samples > trials.shape[1]:
        raise ValidationError(f"baseline of {samples} samples exceeds epoch length")
    return trials - trials[:, :samples].mean(axis=1, keepdims=True)


def transform_trials(trials: np.ndarray, config: WaveletConfig) -> np.ndarray:
    """DWT of every channel of every ``T x J`` trial; returns ``(n, P, J)``."""
    trials = np.asarray(trials, dtype=float)
    return np.moveaxis(dwt_forward(np.moveaxis(trials, 1, 0), config), 0, 1)


def wavelet_epochs(epochs: EpochSet, config: WaveletConfig,
                   mask: CoefficientMask | None = None, baseline_samples: int = 0):
    """Transform time-domain epochs and keep the selected coefficient rows.

    When ``mask`` is None it is estimated from all trials and channels
    (labels are not used). Returns ``(coefficient_epochs, mask)``.
    """
    trials = subtract_baseline(epochs.trials, baseline_samples)
    coeffs = transform_trials(trials, config)
    if mask is None:
        mask = select_coefficients(np.moveaxis(coeffs, 2, 1).reshape(-1, coeffs.shape[1]))
    elif mask.total_len != coeffs.shape[1]:
        raise DimensionError("mask length differs from the coefficient count")
    if mask.size == 0:
        raise ValidationError("coefficient selection kept no coefficients")
    labels = coefficient_labels(config)
    rows = tuple(labels[i] for i in mask.kept_indices)
    return epochs.replace_trials(mask.select(coeffs), row_names=rows), mask


def component_waveform(model: DiscriminantModel, q: int, mask: CoefficientMask,
                       config: WaveletConfig) -> np.ndarray:
    """Time course of discriminant component ``q`` (1-based).

    The row coordinates of the mean difference on axis ``v_q`` are put back
    at their coefficient positions and synthesized with the inverse DWT.
    """
    if not 1 <= q <= model.Q:
        raise ValidationError(f"component {q} out of range 1..{model.Q}")
    if mask.size != model.K:
        raise DimensionError(f"mask keeps {mask.size} coefficients but the model has K={model.K}")
    coords = row_coordinates(model.delta, model)[:, q - 1]
    return dwt_inverse(mask.scatter(coords), config)

