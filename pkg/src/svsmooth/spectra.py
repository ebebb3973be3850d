"""Dense spectral primitives: singular values, thresholded rank, minors,
bottom singular subspace projections, and an interlacing checker."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SingularSpectrum",
    "ProjectionOperator",
    "DegenerateGapWarning",
    "singular_values",
    "smallest_singular_value",
    "operator_norm",
    "is_numerically_singular",
    "k_rank",
    "row_minor",
    "bottom_singular_projection",
    "interlacing_check",
]

SINGULARITY_RTOL = 1e-12


class DegenerateGapWarning(UserWarning):
    """The singular value gap that separates a requested subspace is ~0, so
    the subspace (though not its projection's norm bound) is ill-defined."""


def _as_matrix(A) -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise ValueError(f"expected a matrix, got ndim={A.ndim}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    return A


@dataclass(frozen=True, eq=False)
class SingularSpectrum:
    """Singular values in nonincreasing order; length = min matrix dimension."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", v)
        if v.ndim != 1 or v.size == 0:
            raise ValueError("spectrum must be a nonempty 1-D array")
        if np.any(v < 0.0):
            raise ValueError("negative singular value")
        if np.any(np.diff(v) > 0.0):
            raise ValueError("singular values must be nonincreasing")

    def __len__(self):
        return self.values.size

    def __getitem__(self, i):
        return self.values[i]

    def __iter__(self):
        return iter(self.values)

    def __array__(self, dtype=None, copy=None):
        return np.array(self.values, dtype=dtype)

    @property
    def largest(self) -> float:
        return float(self.values[0])

    @property
    def smallest(self) -> float:
        return float(self.values[-1])


def singular_values(A) -> SingularSpectrum:
    A = _as_matrix(A)
    return SingularSpectrum(np.linalg.svd(A, compute_uv=False))


def smallest_singular_value(A) -> float:
    return singular_values(A).smallest


def operator_norm(A) -> float:
    return singular_values(A).largest


def is_numerically_singular(A) -> bool:
    """s_min < 1e-12 * max(1, s_max); the boolean used wherever 'singular'
    has to be decided in floating point."""
    s = singular_values(A)
    return s.smallest < SINGULARITY_RTOL * max(1.0, s.largest)


def k_rank(A, K: float) -> int:
    """Number of singular values >= K * sqrt(N), N the larger dimension.

    Ties at the threshold count (the comparison is exact >=).
    """
    if not (K > 0.0):
        raise ValueError(f"K must be positive, got {K!r}")
    A = _as_matrix(A)
    s = np.linalg.svd(A, compute_uv=False)
    thr = K * math.sqrt(max(A.shape))
    return int(np.count_nonzero(s >= thr))


def row_minor(A) -> np.ndarray:
    """Drop the last row."""
    A = _as_matrix(A)
    if A.shape[0] < 2:
        raise ValueError("need at least two rows")
    return A[:-1, :].copy()


@dataclass(frozen=True, eq=False)
class ProjectionOperator:
    """Orthogonal projection given by its dense matrix and rank."""

    matrix: np.ndarray
    rank: int

    def __post_init__(self):
        P = _as_matrix(self.matrix)
        object.__setattr__(self, "matrix", P)
        if P.shape[0] != P.shape[1]:
            raise ValueError("projection matrix must be square")
        scale = max(1.0, float(np.abs(P).max()))
        if np.abs(P - P.T).max() > 1e-8 * scale:
            raise ValueError("projection matrix not symmetric")
        if np.abs(P @ P - P).max() > 1e-8:
            raise ValueError("projection matrix not idempotent")
        if abs(float(np.trace(P)) - self.rank) > 1e-6:
            raise ValueError("trace does not match declared rank")

    def apply(self, x: np.ndarray) -> np.ndarray:
        return self.matrix @ x


def bottom_singular_projection(B, m: int) -> ProjectionOperator:
    """Projection onto the span of the left singular vectors attached to the
    m smallest singular values of B (B is q x n with q <= n).

    Emits DegenerateGapWarning when sigma_{q-m} == sigma_{q-m+1} numerically,
    i.e. the subspace is cut through a tied singular value.
    """
    B = _as_matrix(B)
    q, n = B.shape
    if q > n:
        raise ValueError("expected a wide matrix (rows <= columns)")
    if not (1 <= m <= q):
        raise ValueError(f"m must be in [1, {q}], got {m}")
    U, s, _ = np.linalg.svd(B, full_matrices=True)
    if m < q:
        gap = s[q - m - 1] - s[q - m]
        if gap <= 1e-10 * max(1.0, s[0]):
            warnings.warn(
                f"singular value gap at cut {q - m} is {gap:.3e}; the bottom "
                f"subspace is not well separated",
                DegenerateGapWarning,
                stacklevel=2,
            )
    basis = U[:, q - m:]
    return ProjectionOperator(basis @ basis.T, m)


def interlacing_check(A, tol: float = 1e-8) -> bool:
    """Check s_i(A) >= sigma_i(B) >= s_{i+1}(A) for B = A minus its last row,
    plus the counting consequence #{sigma < c} >= #{s < c} - 1 at thresholds
    c placed between well-separated consecutive s values."""
    A = _as_matrix(A)
    s = np.asarray(singular_values(A))
    sig = np.asarray(singular_values(row_minor(A)))
    if not (np.all(s[:-1] >= sig - tol) and np.all(sig >= s[1:] - tol)):
        return False
    cuts = (s[:-1] + s[1:]) / 2.0
    cuts = cuts[(s[:-1] - s[1:]) > 4.0 * tol]
    for c in cuts:
        if np.count_nonzero(sig < c) < np.count_nonzero(s < c) - 1:
            return False
    return True
