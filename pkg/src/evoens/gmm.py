"""Diagonal-covariance Gaussian mixture fitting with silhouette model selection.

EM with deterministic seeded restarts.  The per-iteration log-likelihood is
checked to be non-decreasing (a decrease beyond numerical tolerance raises,
since it can only come from an implementation bug).  ``select_k_by_silhouette``
scans a K range, scoring each fitted mixture by mean silhouette of its hard
assignments, preferring the smaller K on ties.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .seeding import derive_rng

__all__ = ["GmmModel", "gmm_fit", "gmm_assign", "mean_silhouette", "select_k_by_silhouette"]

_LL_TOL = 1e-8


@dataclass(frozen=True)
class GmmModel:
    """Diagonal-covariance mixture: ``means`` (K, d), ``covariances`` (K, d)
    diagonal entries, ``weights`` (K,) on the simplex."""

    means: np.ndarray
    covariances: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        means = np.asarray(self.means, dtype=np.float64)
        covs = np.asarray(self.covariances, dtype=np.float64)
        weights = np.asarray(self.weights, dtype=np.float64)
        if means.ndim != 2 or covs.shape != means.shape or weights.shape != (means.shape[0],):
            raise ValueError("inconsistent GMM parameter shapes")
        if np.any(covs <= 0):
            raise ValueError("covariance diagonals must be strictly positive")
        if abs(float(weights.sum()) - 1.0) > 1e-9 or np.any(weights < 0):
            raise ValueError("mixture weights must lie on the simplex")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "covariances", covs)
        object.__setattr__(self, "weights", weights)

    @property
    def n_components(self) -> int:
        return self.means.shape[0]


def _log_densities(points: np.ndarray, means: np.ndarray, covs: np.ndarray) -> np.ndarray:
    # (n, K) log N(x | mu_k, diag(sigma_k^2))
    diff = points[:, None, :] - means[None, :, :]  # (n, K, d)
    quad = np.sum(diff * diff / covs[None, :, :], axis=2)
    log_norm = np.sum(np.log(2.0 * np.pi * covs), axis=1)  # (K,)
    return -0.5 * (quad + log_norm[None, :])


def _logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    m = np.max(a, axis=axis, keepdims=True)
    return (m + np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True))).squeeze(axis)


def _em_run(
    points: np.ndarray,
    k: int,
    rng: np.random.Generator,
    *,
    max_iter: int,
    tol: float,
    cov_floor: float,
) -> tuple[GmmModel, float, list[float]]:
    n, d = points.shape
    idx = rng.choice(n, size=k, replace=False)
    means = points[idx].copy()
    base_var = np.maximum(points.var(axis=0), cov_floor)
    covs = np.tile(base_var, (k, 1))
    weights = np.full(k, 1.0 / k)

    history: list[float] = []
    prev_ll = -np.inf
    for _ in range(max_iter):
        log_dens = _log_densities(points, means, covs)
        weighted = log_dens + np.log(weights)[None, :]
        log_norm = _logsumexp(weighted, axis=1)  # (n,)
        ll = float(np.mean(log_norm))
        if ll < prev_ll - _LL_TOL:
            raise RuntimeError(f"EM log-likelihood decreased: {prev_ll} -> {ll}")
        history.append(ll)
        resp = np.exp(weighted - log_norm[:, None])  # (n, K)

        nk = resp.sum(axis=0) + 1e-16
        means = (resp.T @ points) / nk[:, None]
        diff = points[:, None, :] - means[None, :, :]
        covs = np.maximum(
            np.einsum("nk,nkd->kd", resp, diff * diff) / nk[:, None], cov_floor
        )
        weights = nk / nk.sum()

        if ll - prev_ll < tol and np.isfinite(prev_ll):
            prev_ll = ll
            break
        prev_ll = ll

    model = GmmModel(means=means, covariances=covs, weights=weights)
    return model, prev_ll, history


def gmm_fit(
    points: np.ndarray,
    k: int,
    seed: int,
    *,
    n_restarts: int = 5,
    max_iter: int = 200,
    tol: float = 1e-6,
    cov_floor: float = 1e-6,
) -> GmmModel:
    """Fit a diagonal GMM with ``n_restarts`` seeded inits, keeping the best
    final log-likelihood (first restart wins ties).  Requires ``1 <= k <= n``."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] == 0:
        raise ValueError("points must be a non-empty 2-D array")
    n = points.shape[0]
    if not 1 <= k <= n:
        raise ConfigError(f"k={k} infeasible for {n} points")

    best: tuple[float, GmmModel] | None = None
    for restart in range(n_restarts):
        rng = derive_rng(seed, "gmm-restart", restart)
        model, ll, _ = _em_run(
            points, k, rng, max_iter=max_iter, tol=tol, cov_floor=cov_floor
        )
        if best is None or ll > best[0] + _LL_TOL:
            best = (ll, model)
    assert best is not None
    return best[1]


def gmm_assign(model: GmmModel, points: np.ndarray) -> np.ndarray:
    """Hard-assign each point to the highest-posterior component
    (ties break to the lowest component index)."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != model.means.shape[1]:
        raise ValueError(f"expected (n, {model.means.shape[1]}) points")
    scores = _log_densities(points, model.means, model.covariances) + np.log(
        np.maximum(model.weights, 1e-300)
    )
    return np.argmax(scores, axis=1).astype(np.int64)


def mean_silhouette(points: np.ndarray, labels: np.ndarray) -> float:
    """Mean silhouette coefficient over all points (Euclidean distances).

    Singleton-cluster points score 0 by convention, as do points whose
    intra- and inter-cluster mean distances are both 0.
    """
    points = np.asarray(points, dtype=np.float64)
    labels = np.asarray(labels)
    n = points.shape[0]
    unique = np.unique(labels)
    if unique.size < 2:
        raise ValueError("silhouette requires at least two clusters")
    diff = points[:, None, :] - points[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=2))
    scores = np.zeros(n)
    for i in range(n):
        own = labels[i]
        own_mask = labels == own
        own_count = int(own_mask.sum())
        if own_count <= 1:
            scores[i] = 0.0
            continue
        a = dist[i, own_mask].sum() / (own_count - 1)
        b = np.inf
        for other in unique:
            if other == own:
                continue
            b = min(b, float(dist[i, labels == other].mean()))
        denom = max(a, b)
        scores[i] = 0.0 if denom == 0 else (b - a) / denom
    return float(scores.mean())


def select_k_by_silhouette(
    points: np.ndarray, k_range: tuple[int, int], seed: int, **fit_kwargs
) -> tuple[int, GmmModel]:
    """Fit GMMs for each K in ``k_range`` (inclusive) and return the K with the
    highest mean silhouette (smaller K on ties).

    A fit whose hard assignment uses fewer than two clusters is infeasible at
    that K; if every candidate K is infeasible a ``ConfigError`` is raised.
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    k_min, k_max = int(k_range[0]), int(k_range[1])
    if not 2 <= k_min <= k_max <= max(n - 1, 1):
        raise ConfigError(f"k range [{k_min}, {k_max}] infeasible for {n} points")

    best: tuple[float, int, GmmModel] | None = None
    for k in range(k_min, k_max + 1):
        model = gmm_fit(points, k, seed, **fit_kwargs)
        labels = gmm_assign(model, points)
        if np.unique(labels).size < 2:
            continue
        score = mean_silhouette(points, labels)
        if best is None or score > best[0] + 1e-12:
            best = (score, k, model)
    if best is None:
        raise ConfigError("no candidate K produced at least two non-empty clusters")
    return best[1], best[2]
