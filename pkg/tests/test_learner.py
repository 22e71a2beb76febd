"""Reference MLP learner: gradients, determinism, head isolation, validation."""

from __future__ import annotations

import dataclasses

import numpy as np
import pytest
from sklearn.linear_model import LogisticRegression

from evoens import (
    ConfigError,
    Dataset,
    LearnerConfig,
    fine_tune_head,
    init_params,
    loss_and_gradients,
    make_blobs,
    predict_labels,
    predict_proba,
    train,
)


def _flatten_grads(grads: dict) -> np.ndarray:
    return np.concatenate([grads[k].ravel() for k in sorted(grads)])


def _numeric_gradient(params, features, labels, activation, step=1e-5):
    """Central finite differences over every parameter entry."""
    out = {}
    for tensor in params.tensors:
        grad = np.zeros(tensor.values.size)
        flat = tensor.values.ravel()
        for idx in range(flat.size):
            for sign in (+1.0, -1.0):
                bumped = flat.copy()
                bumped[idx] += sign * step
                p = params.with_tensors({tensor.name: bumped.reshape(tensor.shape)})
                loss, _ = loss_and_gradients(p, features, labels, activation)
                grad[idx] += sign * loss
        out[tensor.name] = (grad / (2 * step)).reshape(tensor.shape)
    return out


@pytest.mark.parametrize("activation", ["tanh", "relu"])
def test_gradient_check_three_sample_batch(activation):
    rng = np.random.default_rng(17)
    features = rng.normal(size=(3, 4))
    labels = np.array([0, 2, 1])
    config = LearnerConfig(hidden_width=5, activation=activation, seed=2)
    params = init_params(config, feature_dim=4, class_count=3)
    _, analytic = loss_and_gradients(params, features, labels, activation)
    numeric = _numeric_gradient(params, features, labels, activation)
    a = _flatten_grads(analytic)
    n = _flatten_grads(numeric)
    rel = np.abs(a - n) / np.maximum(np.abs(a) + np.abs(n), 1e-8)
    assert rel.max() <= 1e-4


def test_training_deterministic(quick_config, blob_data):
    a = train(quick_config, blob_data)
    b = train(quick_config, blob_data)
    assert a.params.equal_bits(b.params)


def test_noisy_training_paths_deterministic(blob_data):
    config = LearnerConfig(
        hidden_width=8,
        learning_rate=1e-2,
        batch_size=8,
        epochs=2,
        dropout_rate=0.3,
        augmentation_noise=0.05,
        seed=5,
    )
    a = train(config, blob_data)
    b = train(config, blob_data)
    assert a.params.equal_bits(b.params)


def test_matches_logistic_regression_oracle(blob_data):
    config = LearnerConfig(hidden_width=16, learning_rate=1e-2, epochs=20, seed=1)
    model = train(config, blob_data)
    mine = float(np.mean(predict_labels(model, blob_data.features) == blob_data.labels))
    oracle = LogisticRegression().fit(blob_data.features, blob_data.labels)
    theirs = float(oracle.score(blob_data.features, blob_data.labels))
    assert theirs >= 0.95  # the data is separable; oracle confirms
    assert mine >= 0.95


def test_head_isolation(trained_blob_model, blob_data):
    tuned = fine_tune_head(trained_blob_model, blob_data, epochs=3)
    for name in ("hidden.weight", "hidden.bias"):
        np.testing.assert_array_equal(
            tuned.params.tensor(name).values,
            trained_blob_model.params.tensor(name).values,
        )
    moved = any(
        not np.array_equal(
            tuned.params.tensor(n).values, trained_blob_model.params.tensor(n).values
        )
        for n in ("output.weight", "output.bias")
    )
    assert moved
    assert tuned.model_id == trained_blob_model.model_id
    assert tuned.lineage == trained_blob_model.lineage


def test_fine_tune_deterministic(trained_blob_model, blob_data):
    a = fine_tune_head(trained_blob_model, blob_data, epochs=2)
    b = fine_tune_head(trained_blob_model, blob_data, epochs=2)
    assert a.params.equal_bits(b.params)


def test_predictions_are_distributions(trained_blob_model):
    rng = np.random.default_rng(3)
    probs = predict_proba(trained_blob_model, rng.normal(size=(25, 2)) * 50.0)
    assert probs.shape == (25, 2)
    assert np.all(probs >= 0)
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-9)
    assert np.all(np.isfinite(probs))


def test_zero_weight_model_predicts_first_class(quick_config, blob_data):
    params = init_params(quick_config, 2, 2)
    zeroed = params.with_tensors(
        {t.name: np.zeros(t.shape) for t in params.tensors}
    )
    model = dataclasses.replace(train(quick_config, blob_data), params=zeroed)
    probs = predict_proba(model, blob_data.features)
    np.testing.assert_allclose(probs, 0.5, atol=1e-12)
    np.testing.assert_array_equal(
        predict_labels(model, blob_data.features), np.zeros(len(blob_data.labels))
    )


def test_epochs_change_parameters(quick_config, blob_data):
    one = train(dataclasses.replace(quick_config, epochs=1), blob_data)
    two = train(dataclasses.replace(quick_config, epochs=2), blob_data)
    assert not one.params.equal_bits(two.params)


def test_warm_start_requires_matching_architecture(quick_config, blob_data):
    donor = train(dataclasses.replace(quick_config, hidden_width=4), blob_data)
    with pytest.raises(ConfigError):
        train(quick_config, blob_data, init=donor.params)


def test_config_validation():
    for bad in (
        dict(epochs=0),
        dict(learning_rate=0.0),
        dict(hidden_width=0),
        dict(dropout_rate=1.0),
        dict(dropout_rate=-0.1),
        dict(augmentation_noise=-1.0),
        dict(batch_size=0),
        dict(activation="sigmoid"),
    ):
        with pytest.raises((ConfigError, ValueError)):
            LearnerConfig(**bad)


def test_init_params_layout(quick_config):
    params = init_params(quick_config, feature_dim=3, class_count=2)
    names = [t.name for t in params.tensors]
    assert names == ["hidden.weight", "hidden.bias", "output.weight", "output.bias"]
    groups = [t.group.value for t in params.tensors]
    assert groups == ["body", "body", "head", "head"]
    again = init_params(quick_config, feature_dim=3, class_count=2)
    assert params.equal_bits(again)
    np.testing.assert_array_equal(params.tensor("hidden.bias").values, np.zeros(16))


def test_dataset_validation():
    feats = np.zeros((4, 2))
    with pytest.raises(ValueError):
        Dataset(feats, np.array([0, 0, 0, 2]), class_count=3)  # class 1 missing
    with pytest.raises(ValueError):
        Dataset(feats, np.array([0, 1, 0]), class_count=2)  # length mismatch
    with pytest.raises(ValueError):
        Dataset(np.zeros((0, 2)), np.zeros(0, dtype=int), class_count=2)
    with pytest.raises(ValueError):
        Dataset(feats, np.array([0, 1, 0, 3]), class_count=2)  # label >= C


def test_train_records_lineage_and_generation(quick_config, blob_data):
    record = train(quick_config, blob_data, model_id="abc", generation=2)
    assert record.model_id == "abc"
    assert record.generation == 2
    assert record.lineage.kind == "gradient"


def test_training_separates_blobs():
    centers = np.array([[-3.0, 0.0], [3.0, 0.0]])
    data = make_blobs(60, centers, std=0.4, seed=2)
    config = LearnerConfig(hidden_width=16, learning_rate=1e-2, epochs=10, seed=0)
    model = train(config, data)
    acc = float(np.mean(predict_labels(model, data.features) == data.labels))
    assert acc >= 0.98
