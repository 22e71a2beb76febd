"""Reference learner: a one-hidden-layer MLP trained with Adam.

Pure numpy, float64 throughout, bitwise deterministic given the config seed.
Training uses softmax cross-entropy, decoupled weight decay (1e-4 on weight
matrices), optional inverted dropout on the hidden layer, and optional
Gaussian input jitter as augmentation.  ``train`` runs for exactly
``config.epochs`` epochs and never touches validation data — its signature
has nowhere to put any.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from .datasets import Dataset
from .errors import ConfigError
from .params import NamedParamSet, NamedTensor, TensorGroup, TensorRole
from .seeding import derive_rng

__all__ = [
    "Activation",
    "LearnerConfig",
    "Lineage",
    "ModelRecord",
    "architecture_signature",
    "init_params",
    "train",
    "fine_tune_head",
    "predict_proba",
    "predict_labels",
    "loss_and_gradients",
]

_WEIGHT_DECAY = 1e-4
_ADAM_B1, _ADAM_B2, _ADAM_EPS = 0.9, 0.999, 1e-8


class Activation(str, enum.Enum):
    RELU = "relu"
    TANH = "tanh"


@dataclass(frozen=True)
class LearnerConfig:
    hidden_width: int = 32
    activation: Activation = Activation.RELU
    learning_rate: float = 1e-4
    batch_size: int = 32
    epochs: int = 1
    dropout_rate: float = 0.0
    augmentation_noise: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "activation", Activation(self.activation))
        if self.hidden_width < 1:
            raise ConfigError("hidden_width must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError("dropout_rate must be in [0, 1)")
        if self.augmentation_noise < 0:
            raise ConfigError("augmentation_noise must be >= 0")
        if not 0 <= int(self.seed) < 2**63:
            raise ConfigError("seed must be a non-negative 63-bit integer")


@dataclass(frozen=True)
class Lineage:
    kind: str  # "gradient" | "genetic"
    parent_a: str | None = None
    parent_b: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("gradient", "genetic"):
            raise ValueError(f"unknown lineage kind {self.kind!r}")
        if self.kind == "genetic" and (self.parent_a is None or self.parent_b is None):
            raise ValueError("genetic lineage requires both parent ids")

    @classmethod
    def gradient(cls) -> "Lineage":
        return cls(kind="gradient")

    @classmethod
    def genetic(cls, parent_a: str, parent_b: str) -> "Lineage":
        return cls(kind="genetic", parent_a=parent_a, parent_b=parent_b)


@dataclass(frozen=True)
class ModelRecord:
    model_id: str
    params: NamedParamSet
    config: LearnerConfig
    lineage: Lineage
    generation: int = 0


def architecture_signature(feature_dim: int, hidden_width: int, class_count: int) -> str:
    return ";".join(
        [
            f"hidden.weight:{feature_dim}x{hidden_width}:trainable-weight:body",
            f"hidden.bias:{hidden_width}:trainable-bias:body",
            f"output.weight:{hidden_width}x{class_count}:trainable-weight:head",
            f"output.bias:{class_count}:trainable-bias:head",
        ]
    )


def init_params(config: LearnerConfig, feature_dim: int, class_count: int) -> NamedParamSet:
    """Seeded He/Xavier initialization (zero biases)."""
    rng = derive_rng(config.seed, "init")
    h = config.hidden_width
    scale1 = (
        np.sqrt(2.0 / feature_dim)
        if config.activation is Activation.RELU
        else np.sqrt(1.0 / feature_dim)
    )
    w1 = rng.normal(0.0, scale1, size=(feature_dim, h))
    w2 = rng.normal(0.0, np.sqrt(1.0 / h), size=(h, class_count))
    return NamedParamSet(
        tensors=(
            NamedTensor("hidden.weight", (feature_dim, h), w1, TensorRole.WEIGHT, TensorGroup.BODY),
            NamedTensor("hidden.bias", (h,), np.zeros(h), TensorRole.BIAS, TensorGroup.BODY),
            NamedTensor("output.weight", (h, class_count), w2, TensorRole.WEIGHT, TensorGroup.HEAD),
            NamedTensor("output.bias", (class_count,), np.zeros(class_count), TensorRole.BIAS, TensorGroup.HEAD),
        )
    )


def _activate(z: np.ndarray, activation: Activation) -> np.ndarray:
    return np.maximum(z, 0.0) if activation is Activation.RELU else np.tanh(z)


def _activate_grad(z: np.ndarray, a: np.ndarray, activation: Activation) -> np.ndarray:
    return (z > 0).astype(np.float64) if activation is Activation.RELU else 1.0 - a * a


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _forward_backward(
    arrays: dict[str, np.ndarray],
    x: np.ndarray,
    y: np.ndarray,
    activation: Activation,
    dropout_mask: np.ndarray | None,
) -> tuple[float, dict[str, np.ndarray]]:
    w1, b1 = arrays["hidden.weight"], arrays["hidden.bias"]
    w2, b2 = arrays["output.weight"], arrays["output.bias"]
    n = x.shape[0]
    z1 = x @ w1 + b1
    h = _activate(z1, activation)
    hd = h * dropout_mask if dropout_mask is not None else h
    logits = hd @ w2 + b2
    probs = _softmax(logits)
    loss = float(-np.mean(np.log(np.maximum(probs[np.arange(n), y], 1e-300))))

    dlogits = probs.copy()
    dlogits[np.arange(n), y] -= 1.0
    dlogits /= n
    grads = {
        "output.weight": hd.T @ dlogits,
        "output.bias": dlogits.sum(axis=0),
    }
    dhd = dlogits @ w2.T
    dh = dhd * dropout_mask if dropout_mask is not None else dhd
    dz1 = dh * _activate_grad(z1, h, activation)
    grads["hidden.weight"] = x.T @ dz1
    grads["hidden.bias"] = dz1.sum(axis=0)
    return loss, grads


def loss_and_gradients(
    params: NamedParamSet, features: np.ndarray, labels: np.ndarray, activation: Activation | str = Activation.RELU
) -> tuple[float, dict[str, np.ndarray]]:
    """Deterministic cross-entropy loss and analytic gradients (no dropout,
    no augmentation, no weight decay) — the differentiable core that a
    finite-difference check can validate."""
    arrays = {t.name: t.values for t in params.tensors}
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    return _forward_backward(arrays, features, labels, Activation(activation), None)


def _check_init(init: NamedParamSet, config: LearnerConfig, data: Dataset) -> None:
    expected = architecture_signature(data.feature_dim, config.hidden_width, data.class_count)
    if init.architecture_signature != expected:
        raise ConfigError(
            "init parameters do not match the configured architecture: "
            f"{init.architecture_signature!r} vs {expected!r}"
        )


def _run_adam(
    arrays: dict[str, np.ndarray],
    trainable: list[str],
    config: LearnerConfig,
    data: Dataset,
    epochs: int,
    rng: np.random.Generator,
) -> dict[str, np.ndarray]:
    m = {k: np.zeros_like(arrays[k]) for k in trainable}
    v = {k: np.zeros_like(arrays[k]) for k in trainable}
    step = 0
    n = data.n_samples
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            x = data.features[idx]
            y = data.labels[idx]
            if config.augmentation_noise > 0:
                x = x + rng.normal(0.0, config.augmentation_noise, size=x.shape)
            mask = None
            if config.dropout_rate > 0:
                keep = rng.uniform(size=(x.shape[0], config.hidden_width)) >= config.dropout_rate
                mask = keep.astype(np.float64) / (1.0 - config.dropout_rate)
            _, grads = _forward_backward(arrays, x, y, config.activation, mask)
            step += 1
            lr_t = config.learning_rate
            for name in trainable:
                g = grads[name]
                m[name] = _ADAM_B1 * m[name] + (1 - _ADAM_B1) * g
                v[name] = _ADAM_B2 * v[name] + (1 - _ADAM_B2) * g * g
                m_hat = m[name] / (1 - _ADAM_B1**step)
                v_hat = v[name] / (1 - _ADAM_B2**step)
                update = m_hat / (np.sqrt(v_hat) + _ADAM_EPS)
                if name.endswith(".weight"):
                    update = update + _WEIGHT_DECAY * arrays[name]
                arrays[name] = arrays[name] - lr_t * update
    return arrays


def train(
    config: LearnerConfig,
    data: Dataset,
    init: NamedParamSet | None = None,
    *,
    model_id: str | None = None,
    generation: int = 0,
) -> ModelRecord:
    """Train for exactly ``config.epochs`` epochs and return the model.

    ``init`` continues from existing parameters (architecture must match);
    otherwise parameters are freshly initialized from the config seed.  The
    optimizer state always starts fresh.  Lineage is ``gradient`` either way:
    gradient descent produced the returned weights.
    """
    if not isinstance(data, Dataset):
        raise ConfigError("data must be a Dataset")
    if init is not None:
        _check_init(init, config, data)
        start = init
    else:
        start = init_params(config, data.feature_dim, data.class_count)

    arrays = {t.name: t.values.copy() for t in start.tensors}
    trainable = [t.name for t in start.tensors if t.role.trainable]
    rng = derive_rng(config.seed, "train")
    arrays = _run_adam(arrays, trainable, config, data, config.epochs, rng)

    return ModelRecord(
        model_id=model_id if model_id is not None else f"single-{config.seed:x}",
        params=start.with_tensors({k: arrays[k] for k in trainable}),
        config=config,
        lineage=Lineage.gradient(),
        generation=generation,
    )


def fine_tune_head(model: ModelRecord, data: Dataset, epochs: int) -> ModelRecord:
    """Update only the head (trailing group) tensors for ``epochs`` epochs.

    Body tensors are carried over bitwise untouched.  Model id, config,
    lineage, and generation are preserved.
    """
    if epochs < 1:
        raise ConfigError("epochs must be >= 1")
    _check_init(model.params, model.config, data)
    arrays = {t.name: t.values.copy() for t in model.params.tensors}
    head_trainable = [
        t.name
        for t in model.params.tensors
        if t.group is TensorGroup.HEAD and t.role.trainable
    ]
    rng = derive_rng(model.config.seed, "fine-tune")
    arrays = _run_adam(arrays, head_trainable, model.config, data, epochs, rng)
    return replace(
        model, params=model.params.with_tensors({k: arrays[k] for k in head_trainable})
    )


def predict_proba(model: ModelRecord, features: np.ndarray) -> np.ndarray:
    """Class probabilities (n, C); deterministic, dropout and augmentation off.
    Rows sum to 1 within 1e-9."""
    features = np.asarray(features, dtype=np.float64)
    w1 = model.params.tensor("hidden.weight").values
    if features.ndim != 2 or features.shape[1] != w1.shape[0]:
        raise ValueError(f"expected (n, {w1.shape[0]}) features")
    h = _activate(features @ w1 + model.params.tensor("hidden.bias").values, model.config.activation)
    logits = h @ model.params.tensor("output.weight").values + model.params.tensor("output.bias").values
    probs = _softmax(logits)
    return probs / probs.sum(axis=1, keepdims=True)


def predict_labels(model: ModelRecord, features: np.ndarray) -> np.ndarray:
    """Argmax class per row (ties to the lowest class index)."""
    return np.argmax(predict_proba(model, features), axis=1).astype(np.int64)
