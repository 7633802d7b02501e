"""Tables behind the scree, projection and component outputs."""

from __future__ import annotations

import numpy as np

from .discriminant import DiscriminantModel, col_coordinates, row_coordinates, scores_vec


def cumulative_fraction(lam) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    if lam.size == 0:
        return lam.copy()
    return np.cumsum(lam) / np.sum(lam)


def elbow(lam) -> int:
    """Advisory retained dimension from the cumulative scree curve.

    Picks the ``r`` whose point ``(r/Q, F_r)`` lies farthest above the chord
    from ``(0, 0)`` to ``(1, 1)``, where ``F_r`` is the cumulative fraction of
    the eigenvalues. Returns 0 for an empty spectrum.
    """
    frac = cumulative_fraction(lam)
    q = frac.size
    if q == 0:
        return 0
    gap = frac - np.arange(1, q + 1) / q
    return int(np.argmax(gap)) + 1


def scree_rows(lam):
    """Rows ``(q, lambda_q, cumulative_fraction, elbow_flag)``."""
    lam = np.asarray(lam, dtype=float)
    frac = cumulative_fraction(lam)
    r = elbow(lam)
    return [(q + 1, float(lam[q]), float(frac[q]), int(q + 1 == r)) for q in range(lam.size)]


def mean_scores(model: DiscriminantModel, axes) -> np.ndarray:
    idx = np.asarray(axes) - 1
    return np.stack([scores_vec(model.mean1, model)[idx], scores_vec(model.mean2, model)[idx]])


def delta_rows(model: DiscriminantModel) -> np.ndarray:
    """Row coordinates of the mean difference, column q equal to ``sqrt(lam_q) u_q``."""
    return row_coordinates(model.delta, model)


def delta_cols(model: DiscriminantModel) -> np.ndarray:
    """Column coordinates of the mean difference, column q equal to ``sqrt(lam_q) v_q``."""
    return col_coordinates(model.delta, model)
