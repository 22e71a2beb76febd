"""KL and Jensen-Shannon divergences over discrete distributions.

All divergences are reported in nats (natural log).  Conversion to bits is
``value / ln 2``; the Jensen-Shannon divergence is bounded by ``ln 2`` nats,
i.e. 1.0 bit.  Zero handling: terms with ``p[i] == 0`` contribute zero, and
``q`` is floored at ``EPSILON`` inside the log so that ``q[i] == 0`` with
``p[i] > 0`` yields a large finite penalty instead of ``inf``.
"""

from __future__ import annotations

import numpy as np

__all__ = ["EPSILON", "kl_divergence", "js_divergence", "js_to_reference", "js_rows"]

EPSILON = 1e-12

_SUM_TOL = 1e-6


def _check_distribution(p: np.ndarray, name: str) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-D array")
    if np.any(p < 0):
        raise ValueError(f"{name} has negative entries; not a distribution")
    total = float(p.sum())
    if abs(total - 1.0) > _SUM_TOL:
        raise ValueError(f"{name} sums to {total!r}, expected 1 within {_SUM_TOL}")
    return p


def _kl_unchecked(p: np.ndarray, q: np.ndarray) -> float:
    support = p > 0
    ps = p[support]
    val = float(np.sum(ps * (np.log(ps) - np.log(np.maximum(q[support], EPSILON)))))
    return max(val, 0.0)


def kl_divergence(p: np.ndarray, q: np.ndarray) -> float:
    """KL(p || q) in nats.  Asymmetric; >= 0; 0 iff p == q on p's support."""
    p = _check_distribution(p, "p")
    q = _check_distribution(q, "q")
    if p.shape != q.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {q.shape}")
    return _kl_unchecked(p, q)


def js_divergence(p: np.ndarray, q: np.ndarray) -> float:
    """Jensen-Shannon divergence in nats: symmetric, in [0, ln 2], 0 iff p == q."""
    p = _check_distribution(p, "p")
    q = _check_distribution(q, "q")
    if p.shape != q.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {q.shape}")
    m = 0.5 * (p + q)
    val = 0.5 * _kl_unchecked(p, m) + 0.5 * _kl_unchecked(q, m)
    return float(min(val, np.log(2.0)))


def js_to_reference(rows: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Vectorized ``js_divergence(row, reference)`` for each row of ``rows``.

    Rows and the reference must already be valid distributions (validated
    once here, not per row, so iterative callers stay cheap).
    """
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2:
        raise ValueError("rows must be 2-D")
    reference = _check_distribution(reference, "reference")
    if rows.shape[1] != reference.size:
        raise ValueError(f"shape mismatch: {rows.shape[1]} vs {reference.size}")
    if np.any(rows < 0):
        raise ValueError("rows contain negative entries")
    if np.any(np.abs(rows.sum(axis=1) - 1.0) > _SUM_TOL):
        raise ValueError("rows are not normalized distributions")

    return _js_rows_unchecked(rows, np.broadcast_to(reference, rows.shape))


def js_rows(p_rows: np.ndarray, q_rows: np.ndarray) -> np.ndarray:
    """Row-wise ``js_divergence(p_rows[i], q_rows[i])``; same validation and
    zero handling as the scalar form, vectorized."""
    p_rows = np.asarray(p_rows, dtype=np.float64)
    q_rows = np.asarray(q_rows, dtype=np.float64)
    if p_rows.ndim != 2 or p_rows.shape != q_rows.shape:
        raise ValueError("p_rows and q_rows must be matching 2-D arrays")
    for name, rows in (("p_rows", p_rows), ("q_rows", q_rows)):
        if np.any(rows < 0):
            raise ValueError(f"{name} contain negative entries")
        if np.any(np.abs(rows.sum(axis=1) - 1.0) > _SUM_TOL):
            raise ValueError(f"{name} are not normalized distributions")
    return _js_rows_unchecked(p_rows, q_rows)


def _js_rows_unchecked(p_rows: np.ndarray, q_rows: np.ndarray) -> np.ndarray:
    m = 0.5 * (p_rows + q_rows)
    log_m = np.log(np.maximum(m, EPSILON))
    p_term = np.where(
        p_rows > 0, p_rows * (np.log(np.where(p_rows > 0, p_rows, 1.0)) - log_m), 0.0
    )
    q_term = np.where(
        q_rows > 0, q_rows * (np.log(np.where(q_rows > 0, q_rows, 1.0)) - log_m), 0.0
    )
    vals = 0.5 * p_term.sum(axis=1) + 0.5 * q_term.sum(axis=1)
    return np.clip(vals, 0.0, np.log(2.0))
