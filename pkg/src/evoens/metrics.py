"""Evaluation metrics around the geometric mean of class recalls.

``geometric_mean_score`` is the binary G-mean, sqrt(sensitivity *
specificity).  The two gap diagnostics quantify where a model's apparent
quality evaporates: ``vo_gap`` (validation minus test G-mean) exposes
selection bias from validation reuse, ``to_gap`` (train minus validation)
exposes ordinary training overfit.  Both are reported in thousandths
(gap x 1000) so small differences stay legible.
"""

from __future__ import annotations

import numpy as np

from .datasets import Dataset
from .errors import ConfigError
from .mlp import ModelRecord, predict_proba

__all__ = [
    "geometric_mean_score",
    "balanced_gm_score",
    "predictor_probabilities",
    "predictor_labels",
    "vo_gap",
    "to_gap",
]


def geometric_mean_score(predictions: np.ndarray, labels: np.ndarray) -> float:
    """sqrt(sensitivity * specificity) for binary labels {0, 1}.

    ``predictions`` are hard class ids.  Both classes must appear in
    ``labels``; any value outside {0, 1} in either array is an error.
    """
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape or predictions.ndim != 1:
        raise ConfigError("predictions and labels must be matching 1-D arrays")
    if not np.isin(labels, (0, 1)).all() or not np.isin(predictions, (0, 1)).all():
        raise ConfigError("geometric mean score is defined for binary labels {0, 1}")
    pos = labels == 1
    neg = ~pos
    if not pos.any() or not neg.any():
        raise ConfigError("labels must contain both classes")
    sensitivity = float(np.mean(predictions[pos] == 1))
    specificity = float(np.mean(predictions[neg] == 0))
    return float(np.sqrt(sensitivity * specificity))


def balanced_gm_score(predictions: np.ndarray, labels: np.ndarray) -> float:
    """Geometric mean of per-class recalls over the classes present in
    ``labels``.  Coincides with :func:`geometric_mean_score` on binary data;
    defined for any class count (used by election scoring)."""
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    recalls = []
    for c in np.unique(labels):
        mask = labels == c
        recalls.append(float(np.mean(predictions[mask] == c)))
    return float(np.prod(recalls) ** (1.0 / len(recalls)))


def predictor_probabilities(predictor, features: np.ndarray) -> np.ndarray:
    """Class probabilities from either a single :class:`ModelRecord` or an
    ensemble (anything with ``prototypes`` and ``weights``)."""
    if isinstance(predictor, ModelRecord):
        return predict_proba(predictor, features)
    prototypes = getattr(predictor, "prototypes", None)
    weights = getattr(predictor, "weights", None)
    if prototypes is None or weights is None:
        raise ConfigError(f"cannot predict with {type(predictor)!r}")
    stacked = np.stack([predict_proba(p, features) for p in prototypes])
    return np.einsum("k,knc->nc", weights.values, stacked)


def predictor_labels(predictor, features: np.ndarray) -> np.ndarray:
    return np.argmax(predictor_probabilities(predictor, features), axis=1).astype(np.int64)


def _gm_on(predictor, data: Dataset) -> float:
    # balanced_gm_score == geometric_mean_score on binary data, and keeps the
    # gap diagnostics defined for multi-class runs.
    return balanced_gm_score(predictor_labels(predictor, data.features), data.labels)


def vo_gap(predictor, validation: Dataset, test: Dataset) -> float:
    """(validation G-mean - test G-mean) x 1000."""
    return (_gm_on(predictor, validation) - _gm_on(predictor, test)) * 1e3


def to_gap(predictor, train: Dataset, validation: Dataset) -> float:
    """(train G-mean - validation G-mean) x 1000."""
    return (_gm_on(predictor, train) - _gm_on(predictor, validation)) * 1e3
