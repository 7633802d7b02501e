"""Dense kernels for matrices under symmetric positive definite metrics.

Conventions
-----------
Observation matrices are ``K x J`` arrays (rows x columns). The row space
``R^J`` carries a metric ``M`` (``J x J``) and the column space ``R^K`` a
metric ``D`` (``K x K``). The matrix inner product is

    <X, Y>_{M,D} = Tr(X M Y' D)

and agrees with the vector inner product of ``vec_t(X)`` and ``vec_t(Y)``
under ``kron(D, M)``, where ``vec_t`` stacks the *rows* of ``X`` (equivalently
the columns of ``X'``). Switching to column stacking of ``X`` would swap the
order of the Kronecker factors.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np

from .errors import DimensionError, NotPositiveDefiniteError, ValidationError

SYMMETRY_RTOL = 1e-12
DEFAULT_FLOOR_RATIO = 1e-10


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SpdFactor:
    """A symmetric positive definite matrix with its cached functions.

    Build instances with :func:`spd_factorize`; the eigen-decomposition is
    kept so that inverses and square roots are mutually consistent.
    """

    matrix: np.ndarray
    inverse: np.ndarray
    sqrt: np.ndarray
    inv_sqrt: np.ndarray
    eigvals: np.ndarray
    eigvecs: np.ndarray
    eigen_floor: float

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def logdet(self) -> float:
        return float(np.sum(np.log(self.eigvals)))

    def inverted(self) -> "SpdFactor":
        """Factorization of the inverse matrix, reusing the eigenbasis."""
        inv_vals = 1.0 / self.eigvals
        return SpdFactor(
            matrix=self.inverse,
            inverse=self.matrix,
            sqrt=self.inv_sqrt,
            inv_sqrt=self.sqrt,
            eigvals=_readonly(inv_vals),
            eigvecs=self.eigvecs,
            eigen_floor=float(inv_vals.min()),
        )

    def scaled(self, kappa: float) -> "SpdFactor":
        """Factorization of ``kappa * matrix`` for ``kappa > 0``."""
        if not kappa > 0:
            raise ValidationError(f"scale factor must be positive, got {kappa}")
        root = np.sqrt(kappa)
        return SpdFactor(
            matrix=_readonly(kappa * self.matrix),
            inverse=_readonly(self.inverse / kappa),
            sqrt=_readonly(root * self.sqrt),
            inv_sqrt=_readonly(self.inv_sqrt / root),
            eigvals=_readonly(kappa * self.eigvals),
            eigvecs=self.eigvecs,
            eigen_floor=kappa * self.eigen_floor,
        )


MetricLike = Union[SpdFactor, np.ndarray]


def _as_matrix(metric: MetricLike) -> np.ndarray:
    if isinstance(metric, SpdFactor):
        return metric.matrix
    return np.asarray(metric, dtype=float)


def _check_square(a: np.ndarray, name: str) -> None:
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {a.shape}")


def spd_factorize(a, floor_ratio: float = DEFAULT_FLOOR_RATIO) -> SpdFactor:
    """Factorize a symmetric positive (semi-)definite matrix.

    Eigenvalues below ``floor_ratio * lambda_max`` are raised to that floor,
    so the result is always strictly positive definite. When no eigenvalue
    is floored, ``matrix`` is the (symmetrized) input itself.

    Raises
    ------
    DimensionError
        If ``a`` is not square.
    ValidationError
        If ``a`` is not symmetric to ``1e-12`` relative, or has non-finite entries.
    NotPositiveDefiniteError
        If ``lambda_max <= 0`` or ``a`` has clearly negative eigenvalues.
    """
    a = np.asarray(a, dtype=float)
    _check_square(a, "matrix")
    if not np.all(np.isfinite(a)):
        raise ValidationError("matrix has non-finite entries")
    if floor_ratio < 0:
        raise ValidationError(f"floor_ratio must be >= 0, got {floor_ratio}")
    scale = np.linalg.norm(a)
    if np.linalg.norm(a - a.T) > SYMMETRY_RTOL * scale:
        raise ValidationError("matrix is not symmetric")
    a = 0.5 * (a + a.T)

    w, q = np.linalg.eigh(a)
    lam_max = w[-1]
    if not lam_max > 0:
        raise NotPositiveDefiniteError(
            f"largest eigenvalue {lam_max:.6g} is not positive"
        )
    if w[0] < -1e-8 * lam_max:
        raise NotPositiveDefiniteError(
            f"matrix has a negative eigenvalue {w[0]:.6g} (largest {lam_max:.6g})"
        )
    floor = floor_ratio * lam_max
    floored = w < floor
    if floored.any():
        w = np.where(floored, floor, w)
        a = (q * w) @ q.T
        a = 0.5 * (a + a.T)
    # floor == 0 still has to leave strictly positive eigenvalues
    if not w[0] > 0:
        raise NotPositiveDefiniteError("matrix is singular and floor_ratio is 0")

    root = np.sqrt(w)
    return SpdFactor(
        matrix=_readonly(a),
        inverse=_readonly(_sym((q / w) @ q.T)),
        sqrt=_readonly(_sym((q * root) @ q.T)),
        inv_sqrt=_readonly(_sym((q / root) @ q.T)),
        eigvals=_readonly(w),
        eigvecs=_readonly(q),
        eigen_floor=float(floor),
    )


def _sym(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


def vec_t(x) -> np.ndarray:
    """Concatenate the rows of ``x`` (the column stacking of ``x'``)."""
    return np.ascontiguousarray(np.asarray(x, dtype=float)).reshape(-1).copy()


def kron(a, b) -> np.ndarray:
    return np.kron(np.asarray(a, dtype=float), np.asarray(b, dtype=float))


def _check_metrics(shape, m: np.ndarray, d: np.ndarray) -> None:
    k, j = shape
    if m.shape != (j, j):
        raise DimensionError(f"row-space metric must be {j}x{j}, got {m.shape}")
    if d.shape != (k, k):
        raise DimensionError(f"column-space metric must be {k}x{k}, got {d.shape}")


def matrix_inner(x, y, m: MetricLike, d: MetricLike) -> float:
    """Return ``Tr(x M y' D)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 2 or x.shape != y.shape:
        raise DimensionError(f"shapes {x.shape} and {y.shape} do not agree")
    mm, dm = _as_matrix(m), _as_matrix(d)
    _check_metrics(x.shape, mm, dm)
    return float(np.sum((dm @ x @ mm) * y))


def matrix_norm2(x, m: MetricLike, d: MetricLike) -> float:
    return matrix_inner(x, x, m, d)


class MetricSVD(NamedTuple):
    u: np.ndarray
    lam: np.ndarray
    v: np.ndarray


def default_rank_tol(k: int, j: int) -> float:
    return max(k, j) * 1e-12


def metric_svd(delta, m: SpdFactor, d: SpdFactor, rank_tol: float | None = None) -> MetricSVD:
    """Singular value decomposition of ``delta`` with D- and M-orthonormal vectors.

    Computes the ordinary SVD of the whitened matrix ``D^{1/2} delta M^{1/2}``
    and maps the singular vectors back, so that

        delta = U diag(sqrt(lam)) V',   U' D U = I,   V' M V = I,
        V = delta' D U diag(lam^{-1/2}).

    Only singular values above ``rank_tol`` times the largest one are kept.
    Signs are fixed so the largest-magnitude entry of each whitened left
    vector is positive (lowest index on ties).
    """
    delta = np.asarray(delta, dtype=float)
    if delta.ndim != 2:
        raise DimensionError(f"delta must be a matrix, got shape {delta.shape}")
    _check_metrics(delta.shape, m.matrix, d.matrix)
    k, j = delta.shape
    if rank_tol is None:
        rank_tol = default_rank_tol(k, j)
    if not rank_tol > 0:
        raise ValidationError(f"rank_tol must be positive, got {rank_tol}")

    w = d.sqrt @ delta @ m.sqrt
    ut, s, vt = np.linalg.svd(w, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        q = 0
    else:
        q = int(np.count_nonzero(s > rank_tol * s[0]))
    ut, s, vt = ut[:, :q], s[:q], vt[:q].T

    pivots = np.argmax(np.abs(ut), axis=0)
    signs = np.where(ut[pivots, np.arange(q)] < 0, -1.0, 1.0)
    ut = ut * signs
    vt = vt * signs

    return MetricSVD(u=d.inv_sqrt @ ut, lam=s**2, v=m.inv_sqrt @ vt)
