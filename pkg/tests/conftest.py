"""Shared fixtures: small deterministic datasets and trained models.

Everything here is seeded; no fixture performs network or filesystem work
outside pytest's tmp_path machinery.
"""

from __future__ import annotations

import numpy as np
import pytest

from evoens import (
    Dataset,
    LearnerConfig,
    LearnerConfigSpace,
    make_blobs,
    train,
)


@pytest.fixture(scope="session")
def blob_data() -> Dataset:
    """Two well-separated 2-d Gaussian blobs, 40 samples per class."""
    centers = np.array([[-2.0, 0.0], [2.0, 0.0]])
    return make_blobs(40, centers, std=0.5, seed=11)


@pytest.fixture(scope="session")
def three_blob_points() -> tuple[np.ndarray, np.ndarray]:
    """Three tight, well-separated point clouds plus ground-truth labels."""
    rng = np.random.default_rng(7)
    centers = np.array([[0.0, 0.0], [8.0, 0.0], [0.0, 8.0]])
    points = np.concatenate(
        [c + rng.normal(0.0, 0.4, size=(30, 2)) for c in centers]
    )
    labels = np.repeat(np.arange(3), 30)
    return points, labels


@pytest.fixture(scope="session")
def quick_config() -> LearnerConfig:
    return LearnerConfig(
        hidden_width=16, learning_rate=1e-2, batch_size=16, epochs=2, seed=3
    )


@pytest.fixture(scope="session")
def trained_blob_model(quick_config, blob_data):
    return train(quick_config, blob_data, model_id="blob-ref")


@pytest.fixture(scope="session")
def benchmark_split() -> tuple[Dataset, Dataset]:
    """The shifted two-mode benchmark after a divergence-guided 30/70 split."""
    from evoens import SplitConfig, jsd_guided_split, make_two_mode_benchmark

    dataset, embeddings, _ = make_two_mode_benchmark(2000, seed=0)
    split = jsd_guided_split(
        embeddings, dataset.labels, SplitConfig(train_ratio=0.3, seed=0)
    )
    return dataset.subset(split.train_ids), dataset.subset(split.test_ids)


@pytest.fixture(scope="session")
def tiny_space() -> LearnerConfigSpace:
    """A small config space for fast pool generation in tests."""
    return LearnerConfigSpace(
        hidden_widths=(8,),
        dropout_rates=(0.0, 0.1),
        augmentation_noises=(0.0, 0.01),
        epochs_choices=(1,),
        learning_rate=1e-2,
        batch_size=16,
    )


def random_distribution(rng: np.random.Generator, dim: int) -> np.ndarray:
    """A random point on the probability simplex (Dirichlet-ish via gamma)."""
    raw = rng.gamma(1.0, 1.0, size=dim) + 1e-9
    return raw / raw.sum()
