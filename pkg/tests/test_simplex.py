"""Simplex projection and convex weight fitting against brute-force oracles."""

from __future__ import annotations

import itertools
import math

import numpy as np
import pytest

from evoens import (
    SimplexWeights,
    blended_cross_entropy,
    optimize_simplex_weights,
    project_to_simplex,
)


def _projection_oracle(v: np.ndarray) -> np.ndarray:
    """Exhaustive-support projection: try every candidate support set, solve
    the equality-constrained least squares in closed form, keep the feasible
    solution closest to v.  Independent of the sort-threshold algorithm."""
    d = v.size
    best, best_dist = None, np.inf
    for r in range(1, d + 1):
        for support in itertools.combinations(range(d), r):
            idx = list(support)
            lam = (1.0 - v[idx].sum()) / r
            w = np.zeros(d)
            w[idx] = v[idx] + lam
            if np.any(w[idx] < -1e-12):
                continue
            dist = float(np.sum((w - v) ** 2))
            if dist < best_dist - 1e-15:
                best, best_dist = w, dist
    return best


def test_projection_hand_cases():
    np.testing.assert_allclose(project_to_simplex(np.array([2.0, 0.0])), [1.0, 0.0])
    np.testing.assert_allclose(project_to_simplex(np.array([0.3, 0.3])), [0.5, 0.5])
    p = np.array([0.2, 0.5, 0.3])
    np.testing.assert_allclose(project_to_simplex(p), p, atol=1e-15)


def test_projection_matches_exhaustive_oracle():
    rng = np.random.default_rng(0)
    for _ in range(100):
        d = int(rng.integers(2, 7))
        v = rng.normal(0.0, 2.0, size=d)
        got = project_to_simplex(v)
        want = _projection_oracle(v)
        np.testing.assert_allclose(got, want, atol=1e-9)


def test_projection_output_on_simplex_fuzz():
    rng = np.random.default_rng(1)
    for _ in range(200):
        v = rng.normal(0.0, 5.0, size=int(rng.integers(1, 10)))
        w = project_to_simplex(v)
        assert np.all(w >= 0)
        assert w.sum() == pytest.approx(1.0, abs=1e-9)


def test_blended_cross_entropy_hand_value():
    preds = np.array([[[0.8, 0.2], [0.4, 0.6]]])  # one model, two samples
    labels = np.array([0, 1])
    got = blended_cross_entropy(np.array([1.0]), preds, labels)
    assert got == pytest.approx(-(math.log(0.8) + math.log(0.6)) / 2, abs=1e-12)


def test_blended_cross_entropy_uniform_mixture():
    a = np.array([[0.9, 0.1], [0.2, 0.8]])
    b = np.array([[0.5, 0.5], [0.6, 0.4]])
    labels = np.array([0, 1])
    got = blended_cross_entropy(np.array([0.5, 0.5]), np.stack([a, b]), labels)
    want = -(math.log(0.7) + math.log(0.6)) / 2
    assert got == pytest.approx(want, abs=1e-12)


def _random_problem(rng: np.random.Generator, k: int, n: int, c: int):
    logits = rng.normal(size=(k, n, c)) * 2.0
    preds = np.exp(logits)
    preds /= preds.sum(axis=2, keepdims=True)
    labels = rng.integers(0, c, size=n)
    return preds, labels


def test_single_prototype_returns_unit_weight():
    rng = np.random.default_rng(2)
    preds, labels = _random_problem(rng, 1, 12, 3)
    w = optimize_simplex_weights(preds, labels)
    np.testing.assert_array_equal(w.values, [1.0])


def test_two_prototype_grid_oracle():
    # 1e-3-resolution line search over w = (t, 1-t) is the oracle objective.
    rng = np.random.default_rng(3)
    for trial in range(10):
        preds, labels = _random_problem(rng, 2, 40, 3)
        w = optimize_simplex_weights(preds, labels)
        mine = blended_cross_entropy(w.values, preds, labels)
        grid = np.linspace(0.0, 1.0, 1001)
        oracle = min(
            blended_cross_entropy(np.array([t, 1.0 - t]), preds, labels) for t in grid
        )
        assert mine <= oracle + 1e-6


def test_kkt_certificate_fuzz():
    # At the optimum of a convex objective over the simplex, every active
    # coordinate's partial derivative equals the minimum partial derivative.
    rng = np.random.default_rng(4)
    for trial in range(20):
        k = int(rng.integers(2, 6))
        preds, labels = _random_problem(rng, k, 50, 2)
        w = optimize_simplex_weights(preds, labels).values
        true_probs = preds[:, np.arange(labels.size), labels]
        grad = -(true_probs / np.maximum(w @ true_probs, 1e-12)).mean(axis=1)
        gmin = grad.min()
        assert np.all(grad[w > 1e-7] <= gmin + 1e-4)


def test_constraints_and_uniform_improvement_fuzz():
    rng = np.random.default_rng(5)
    for trial in range(25):
        k = int(rng.integers(2, 7))
        preds, labels = _random_problem(rng, k, 30, 4)
        w = optimize_simplex_weights(preds, labels)
        assert np.all(w.values >= -1e-8)
        assert w.values.sum() == pytest.approx(1.0, abs=1e-8)
        fitted = blended_cross_entropy(w.values, preds, labels)
        uniform = blended_cross_entropy(np.full(k, 1.0 / k), preds, labels)
        assert fitted <= uniform + 1e-9


def test_vertex_domination():
    rng = np.random.default_rng(6)
    preds, labels = _random_problem(rng, 4, 60, 3)
    w = optimize_simplex_weights(preds, labels)
    fitted = blended_cross_entropy(w.values, preds, labels)
    for k in range(4):
        vertex = np.zeros(4)
        vertex[k] = 1.0
        assert fitted <= blended_cross_entropy(vertex, preds, labels) + 1e-9


def test_dominant_prototype_gets_weight():
    # One prototype nails every label with prob .97; others are wrong or flat.
    n = 50
    labels = np.tile(np.array([0, 1]), n // 2)
    good = np.zeros((n, 2)) + 0.03
    good[np.arange(n), labels] = 0.97
    bad = np.zeros((n, 2)) + 0.9
    bad[np.arange(n), labels] = 0.1
    flat = np.full((n, 2), 0.5)
    preds = np.stack([bad, good, flat])
    w = optimize_simplex_weights(preds, labels)
    assert w.values[1] >= 0.9


def test_input_validation():
    labels = np.array([0, 1])
    with pytest.raises(ValueError):
        optimize_simplex_weights(np.full((2, 2), 0.5), labels)  # not 3-D
    bad_rows = np.full((1, 2, 2), 0.4)  # rows sum to 0.8
    with pytest.raises(ValueError):
        optimize_simplex_weights(bad_rows, labels)
    nan_rows = np.full((1, 2, 2), 0.5)
    nan_rows[0, 0, 0] = np.nan
    with pytest.raises(ValueError):
        optimize_simplex_weights(nan_rows, labels)
    good = np.full((1, 2, 2), 0.5)
    with pytest.raises(ValueError):
        optimize_simplex_weights(good, np.array([0, 5]))


def test_simplex_weights_validation():
    with pytest.raises(ValueError):
        SimplexWeights(values=np.array([0.6, 0.6]))
    with pytest.raises(ValueError):
        SimplexWeights(values=np.array([-0.2, 1.2]))
    w = SimplexWeights(values=np.array([0.25, 0.75]))
    np.testing.assert_array_equal(w.values, [0.25, 0.75])
