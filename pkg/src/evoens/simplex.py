"""Probability-simplex projection and ensemble-weight optimization.

Weights for blending per-model class-probability predictions are fit by
minimizing mean cross-entropy of the blended prediction over labeled data,
constrained to the probability simplex.  The solver is projected gradient
descent with a backtracking (step-halving) line search; the returned point
satisfies a KKT-style stationarity check: ``||w - project(w - grad)|| <= tol``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

__all__ = [
    "SimplexWeights",
    "project_to_simplex",
    "blended_cross_entropy",
    "optimize_simplex_weights",
]

_LOG_FLOOR = 1e-12
_CONSTRAINT_TOL = 1e-8


@dataclass(frozen=True)
class SimplexWeights:
    """Convex weights: non-negative, summing to 1 within 1e-8."""

    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("weights must be a non-empty 1-D array")
        if np.any(values < -_CONSTRAINT_TOL):
            raise ValueError("weights must be non-negative")
        if abs(float(values.sum()) - 1.0) > _CONSTRAINT_TOL:
            raise ValueError("weights must sum to 1")
        object.__setattr__(self, "values", np.maximum(values, 0.0))


def project_to_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection of ``v`` onto the probability simplex
    (sort-and-threshold algorithm)."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("v must be a non-empty 1-D array")
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ks = np.arange(1, v.size + 1)
    cond = u - css / ks > 0
    rho = int(np.nonzero(cond)[0][-1])
    tau = css[rho] / (rho + 1)
    return np.maximum(v - tau, 0.0)


def _stack_predictions(prediction_sets: np.ndarray) -> np.ndarray:
    preds = np.asarray(prediction_sets, dtype=np.float64)
    if preds.ndim != 3:
        raise ValueError("prediction_sets must have shape (K, n, C)")
    if np.any(~np.isfinite(preds)):
        raise ValueError("prediction_sets contain NaN or infinite entries")
    if np.any(preds < -1e-9) or np.any(np.abs(preds.sum(axis=2) - 1.0) > 1e-6):
        raise ValueError("prediction rows must be probability distributions")
    return preds


def blended_cross_entropy(
    weights: np.ndarray, prediction_sets: np.ndarray, labels: np.ndarray
) -> float:
    """Mean cross-entropy of ``sum_k weights[k] * prediction_sets[k]`` against
    integer ``labels``, with the blended probability floored at 1e-12."""
    preds = _stack_predictions(prediction_sets)
    labels = np.asarray(labels)
    true_probs = preds[:, np.arange(labels.size), labels]  # (K, n)
    blended = np.asarray(weights, dtype=np.float64) @ true_probs
    return float(-np.mean(np.log(np.maximum(blended, _LOG_FLOOR))))


def optimize_simplex_weights(
    prediction_sets: np.ndarray,
    labels: np.ndarray,
    *,
    max_iter: int = 1000,
    tol: float = 1e-6,
) -> SimplexWeights:
    """Minimize blended cross-entropy over the probability simplex.

    ``prediction_sets`` is (K, n, C) with row-stochastic prediction matrices;
    ``labels`` is (n,) integer classes.  Deterministic: starts from uniform
    weights, projected gradient descent with step halving, stops when the
    unit-step projected gradient norm falls below ``tol`` (or at ``max_iter``).
    For K == 1 returns [1.0] immediately.  The objective is convex, so the
    stationary point is a global minimum.
    """
    preds = _stack_predictions(prediction_sets)
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.size != preds.shape[1]:
        raise ValueError("labels must be (n,) matching prediction_sets")
    if np.any(labels < 0) or np.any(labels >= preds.shape[2]):
        raise ValueError("labels out of range for prediction classes")
    k = preds.shape[0]
    if k == 1:
        return SimplexWeights(values=np.array([1.0]))

    n = labels.size
    true_probs = preds[:, np.arange(n), labels]  # (K, n): A^T in the notes

    def objective(w: np.ndarray) -> float:
        return float(-np.mean(np.log(np.maximum(w @ true_probs, _LOG_FLOOR))))

    def gradient(w: np.ndarray) -> np.ndarray:
        blended = np.maximum(w @ true_probs, _LOG_FLOOR)  # (n,)
        return -(true_probs / blended[None, :]).mean(axis=1)

    w = np.full(k, 1.0 / k)
    f = objective(w)
    step = 1.0
    for _ in range(max_iter):
        g = gradient(w)
        if np.linalg.norm(w - project_to_simplex(w - g)) <= tol:
            break
        step = min(step * 2.0, 1e6)  # allow recovery after conservative steps
        accepted = False
        for _ in range(60):
            candidate = project_to_simplex(w - step * g)
            fc = objective(candidate)
            if fc <= f - 1e-12 or (fc <= f and not np.array_equal(candidate, w)):
                w, f = candidate, fc
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break

    return SimplexWeights(values=project_to_simplex(w))
