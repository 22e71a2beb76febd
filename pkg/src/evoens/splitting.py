"""Divergence-guided dataset splitting over embedding distributions.

``jsd_guided_split`` builds a train/test partition whose sides are maximally
separated in embedding space while holding the per-class train ratio exact.
Per class (in sorted label order): start from a random assignment at exactly
``round(ratio * N_c)`` train samples (round = floor(x + 0.5)); repeatedly
rank samples by how much closer they sit to the class train centroid than to
the class test centroid (Jensen-Shannon, ties by original index) and move the
top-ranked into train; accept a reassignment only if it improves the *global*
JSD — between the overall train and test mean embeddings — by at least
``epsilon_conv``, otherwise stop.  After a class converges, an optional
overlap-injection step swaps ``floor(zeta * n_train_c)`` random samples in
each direction, trading divergence back toward a random split while keeping
ratios exact.

The reported per-class iteration count is the number of *accepted*
reassignments, and the accepted global-JSD trajectory is non-decreasing by
construction.  Divergences are tracked in nats; metadata reports bits too.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .divergences import js_divergence, js_to_reference
from .errors import SplitError
from .seeding import derive_rng, derive_seed

__all__ = ["SplitConfig", "SplitIndices", "jsd_guided_split", "pretext_softmax_embeddings"]

_LN2 = float(np.log(2.0))


@dataclass(frozen=True)
class SplitConfig:
    train_ratio: float
    max_iterations: int = 10
    epsilon_conv: float = 1e-4
    zeta: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.train_ratio < 1.0:
            raise SplitError("train_ratio must be in (0, 1)")
        if self.max_iterations < 1:
            raise SplitError("max_iterations must be >= 1")
        if self.epsilon_conv <= 0:
            raise SplitError("epsilon_conv must be > 0")
        if not 0.0 <= self.zeta <= 0.5:
            raise SplitError("zeta must be in [0, 0.5]")


@dataclass(frozen=True)
class SplitIndices:
    train_ids: np.ndarray
    test_ids: np.ndarray
    per_class_jsd: dict[int, float]
    per_class_iterations: dict[int, int]
    global_jsd: float  # nats
    accepted_trajectory: tuple[float, ...]  # accepted global JSD values, in order

    @property
    def global_jsd_bits(self) -> float:
        return self.global_jsd / _LN2

    def to_metadata(self, config: SplitConfig) -> dict:
        return {
            "train_ratio": config.train_ratio,
            "zeta": config.zeta,
            "seed": config.seed,
            "epsilon_conv": config.epsilon_conv,
            "max_iterations": config.max_iterations,
            "n_train": int(self.train_ids.size),
            "n_test": int(self.test_ids.size),
            "global_jsd_nats": self.global_jsd,
            "global_jsd_bits": self.global_jsd_bits,
            "per_class_jsd_nats": {str(c): v for c, v in self.per_class_jsd.items()},
            "per_class_jsd_bits": {
                str(c): v / _LN2 for c, v in self.per_class_jsd.items()
            },
            "per_class_iterations": {
                str(c): n for c, n in self.per_class_iterations.items()
            },
            "accepted_trajectory_nats": list(self.accepted_trajectory),
        }


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def _check_embeddings(embeddings: np.ndarray) -> np.ndarray:
    embeddings = np.asarray(embeddings, dtype=np.float64)
    if embeddings.ndim != 2 or embeddings.shape[0] == 0:
        raise SplitError("embeddings must be a non-empty (n, d) array")
    if np.any(embeddings < 0) or np.any(np.abs(embeddings.sum(axis=1) - 1.0) > 1e-6):
        raise SplitError("embedding rows must be probability distributions")
    return embeddings


def jsd_guided_split(
    embeddings: np.ndarray, labels: np.ndarray, config: SplitConfig
) -> SplitIndices:
    embeddings = _check_embeddings(embeddings)
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (embeddings.shape[0],):
        raise SplitError("labels must be (n,) matching embeddings")

    classes = [int(c) for c in np.unique(labels)]
    class_idx: dict[int, np.ndarray] = {}
    quotas: dict[int, int] = {}
    for c in classes:
        idx = np.nonzero(labels == c)[0]
        n_train = _round_half_up(config.train_ratio * idx.size)
        if not 1 <= n_train <= idx.size - 1:
            raise SplitError(
                f"class {c}: ratio {config.train_ratio} leaves no room on one side "
                f"({n_train} of {idx.size} samples for train)"
            )
        class_idx[c] = idx
        quotas[c] = n_train

    train_mask = np.zeros(embeddings.shape[0], dtype=bool)
    for c in classes:
        idx = class_idx[c]
        rng = derive_rng(config.seed, "init", c)
        chosen = rng.choice(idx.size, size=quotas[c], replace=False)
        train_mask[idx[chosen]] = True

    def global_jsd(mask: np.ndarray) -> float:
        return js_divergence(embeddings[mask].mean(axis=0), embeddings[~mask].mean(axis=0))

    current_global = global_jsd(train_mask)
    trajectory: list[float] = [current_global]
    iterations: dict[int, int] = {c: 0 for c in classes}

    for c in classes:
        idx = class_idx[c]
        emb_c = embeddings[idx]
        for _ in range(config.max_iterations):
            in_train = train_mask[idx]
            mu_t = emb_c[in_train].mean(axis=0)
            mu_e = emb_c[~in_train].mean(axis=0)
            delta = js_to_reference(emb_c, mu_e) - js_to_reference(emb_c, mu_t)
            order = np.argsort(-delta, kind="stable")
            candidate = np.zeros(idx.size, dtype=bool)
            candidate[order[: quotas[c]]] = True
            if np.array_equal(candidate, in_train):
                break
            proposed = train_mask.copy()
            proposed[idx] = candidate
            proposed_global = global_jsd(proposed)
            if proposed_global - current_global < config.epsilon_conv:
                break
            train_mask = proposed
            current_global = proposed_global
            trajectory.append(current_global)
            iterations[c] += 1

        if config.zeta > 0:
            train_side = idx[train_mask[idx]]
            test_side = idx[~train_mask[idx]]
            # Swapping the same count in both directions keeps the ratio exact.
            n_swap = min(int(np.floor(config.zeta * quotas[c])), test_side.size)
            if n_swap >= 1:
                rng = derive_rng(config.seed, "overlap", c)
                out = rng.choice(train_side.size, size=n_swap, replace=False)
                into = rng.choice(test_side.size, size=n_swap, replace=False)
                train_mask[train_side[out]] = False
                train_mask[test_side[into]] = True
                current_global = global_jsd(train_mask)

    per_class_jsd = {}
    for c in classes:
        idx = class_idx[c]
        in_train = train_mask[idx]
        per_class_jsd[c] = js_divergence(
            embeddings[idx[in_train]].mean(axis=0), embeddings[idx[~in_train]].mean(axis=0)
        )

    return SplitIndices(
        train_ids=np.sort(np.nonzero(train_mask)[0]),
        test_ids=np.sort(np.nonzero(~train_mask)[0]),
        per_class_jsd=per_class_jsd,
        per_class_iterations=iterations,
        global_jsd=global_jsd(train_mask),
        accepted_trajectory=tuple(trajectory),
    )


def pretext_softmax_embeddings(
    features: np.ndarray,
    *,
    n_outputs: int = 4,
    seed: int = 0,
    epochs: int = 3,
    hidden_width: int = 16,
    learning_rate: float = 1e-2,
) -> np.ndarray:
    """Row-stochastic embeddings from a label-free pretext task.

    A seeded random linear projection of the standardized features defines
    pseudo-classes (argmax over ``n_outputs`` directions); the reference MLP
    is trained on those pseudo-labels and its softmax outputs become the
    embeddings.  The real labels are never consulted, so the encoder is
    "unrelated" to the downstream task in the sense the splitter needs; it is
    still deterministic given the seed.
    """
    from .datasets import Dataset  # local import: datasets does not need splitting
    from .mlp import LearnerConfig, predict_proba, train

    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] < 4:
        raise SplitError("pretext encoder needs a non-trivial (n, d) feature array")
    if n_outputs < 2:
        raise SplitError("n_outputs must be >= 2")
    std = features.std(axis=0)
    standardized = (features - features.mean(axis=0)) / np.where(std > 0, std, 1.0)
    rng = derive_rng(seed, "pretext-projection")
    projection = rng.normal(size=(features.shape[1], n_outputs))
    pseudo = np.argmax(standardized @ projection, axis=1)
    present = np.unique(pseudo)
    if present.size < 2:
        # Degenerate projection: fall back to a median split on the first axis.
        pivot = np.median(standardized @ projection[:, 0])
        pseudo = (standardized @ projection[:, 0] > pivot).astype(np.int64)
        present = np.unique(pseudo)
        if present.size < 2:
            raise SplitError("features are too degenerate for a pretext task")
    remap = {int(c): i for i, c in enumerate(present)}
    pseudo = np.array([remap[int(c)] for c in pseudo], dtype=np.int64)

    pretext_data = Dataset(features=features, labels=pseudo, class_count=present.size)
    config = LearnerConfig(
        hidden_width=hidden_width,
        learning_rate=learning_rate,
        epochs=epochs,
        seed=derive_seed(seed, "pretext-train"),
    )
    model = train(config, pretext_data, model_id="pretext-encoder")
    return predict_proba(model, features)
