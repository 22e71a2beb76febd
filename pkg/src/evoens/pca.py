"""Principal-component dimensionality reduction (numpy SVD, deterministic).

Used to compress prediction signatures before clustering.  The reducer
interface is just ``reduce(points, target_dim) -> (n, target_dim) array``;
:func:`reduce_dim` is the default, and anything with the same shape contract
can be plugged into the clustering step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["PcaReducer", "reduce_dim"]


def _fix_signs(components: np.ndarray) -> np.ndarray:
    # Deterministic sign convention: the largest-magnitude entry of each
    # component is made positive, so SVD sign ambiguity cannot leak into
    # downstream clustering.
    fixed = components.copy()
    for i in range(fixed.shape[0]):
        row = fixed[i]
        j = int(np.argmax(np.abs(row)))
        if row[j] < 0:
            fixed[i] = -row
    return fixed


@dataclass(frozen=True)
class PcaReducer:
    """Fitted principal components: ``transform`` projects, zero-padding
    columns beyond the data rank so the output width always equals
    ``target_dim``."""

    mean: np.ndarray
    components: np.ndarray  # (rank, d), orthonormal rows
    explained_variance: np.ndarray  # (rank,), eigenvalues of the covariance
    target_dim: int

    def transform(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        if points.ndim != 2 or points.shape[1] != self.mean.size:
            raise ValueError(f"expected (n, {self.mean.size}) points")
        projected = (points - self.mean) @ self.components.T
        out = np.zeros((points.shape[0], self.target_dim), dtype=np.float64)
        k = min(self.target_dim, projected.shape[1])
        out[:, :k] = projected[:, :k]
        return out


def fit_pca(points: np.ndarray, target_dim: int) -> PcaReducer:
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] == 0:
        raise ValueError("points must be a non-empty 2-D array")
    if not 1 <= target_dim:
        raise ValueError("target_dim must be >= 1")
    mean = points.mean(axis=0)
    centered = points - mean
    # SVD of the centered matrix; eigenvalues of the covariance are s^2/(n-1).
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    n = points.shape[0]
    denom = max(n - 1, 1)
    explained = (s**2) / denom
    # Drop numerically-zero directions so rank-deficient inputs produce
    # clean zero-padded columns instead of noise.
    tol = max(points.shape) * np.finfo(np.float64).eps * (s[0] if s.size else 0.0)
    rank = int(np.sum(s > tol))
    keep = min(rank, target_dim)
    components = _fix_signs(vt[:keep])
    return PcaReducer(
        mean=mean,
        components=components,
        explained_variance=explained[:keep],
        target_dim=int(target_dim),
    )


def reduce_dim(points: np.ndarray, target_dim: int) -> np.ndarray:
    """Project ``points`` onto their top ``target_dim`` principal components.

    Output is always ``(n, target_dim)``; directions beyond the data rank are
    zero columns.  A single point reduces to a single zero row.  When
    ``target_dim >= rank`` pairwise distances are preserved exactly (up to
    floating-point) because the kept components span the centered data.
    """
    reducer = fit_pca(points, target_dim)
    return reducer.transform(np.asarray(points, dtype=np.float64))
