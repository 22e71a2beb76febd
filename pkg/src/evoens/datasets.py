"""Dataset container, CSV IO, stratified splitting, and synthetic data.

A :class:`Dataset` is float64 features plus int64 labels in ``[0, class_count)``
with every class represented.  CSV layout is ``f0,...,f{d-1},label`` with a
header row.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .seeding import derive_rng

__all__ = [
    "Dataset",
    "load_dataset_csv",
    "save_dataset_csv",
    "load_embeddings_csv",
    "save_embeddings_csv",
    "stratified_split_indices",
    "perturb_inputs",
    "make_blobs",
    "make_two_mode_benchmark",
]


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray  # (n, d) float64
    labels: np.ndarray  # (n,) int64
    class_count: int

    def __post_init__(self) -> None:
        features = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if features.ndim != 2 or features.shape[0] == 0:
            raise ValueError("features must be a non-empty (n, d) array")
        if labels.shape != (features.shape[0],):
            raise ValueError("labels must be (n,) matching features")
        c = int(self.class_count)
        if c < 2:
            raise ValueError("class_count must be >= 2")
        if labels.min() < 0 or labels.max() >= c:
            raise ValueError("labels out of range")
        present = np.unique(labels)
        if present.size != c:
            missing = sorted(set(range(c)) - set(present.tolist()))
            raise ValueError(f"classes {missing} are empty")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "class_count", c)

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def subset(self, indices: np.ndarray) -> "Dataset":
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(
            features=self.features[indices],
            labels=self.labels[indices],
            class_count=self.class_count,
        )


def load_dataset_csv(path: str | Path) -> Dataset:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"dataset file not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[-1] != "label":
            raise ConfigError(f"{path}: expected a header ending in 'label'")
        rows = list(reader)
    if not rows:
        raise ConfigError(f"{path}: no data rows")
    try:
        features = np.array([[float(v) for v in row[:-1]] for row in rows])
        labels = np.array([int(row[-1]) for row in rows], dtype=np.int64)
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"{path}: malformed row ({exc})") from exc
    try:
        return Dataset(features=features, labels=labels, class_count=int(labels.max()) + 1)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def save_dataset_csv(dataset: Dataset, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"f{i}" for i in range(dataset.feature_dim)] + ["label"])
        for x, y in zip(dataset.features, dataset.labels):
            writer.writerow([repr(float(v)) for v in x] + [int(y)])


def load_embeddings_csv(path: str | Path) -> np.ndarray:
    """Row-stochastic embedding vectors, one row per sample, header ``e0..``."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"embeddings file not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        next(reader, None)  # header
        try:
            rows = np.array([[float(v) for v in row] for row in reader])
        except ValueError as exc:
            raise ConfigError(f"{path}: malformed row ({exc})") from exc
    if rows.ndim != 2 or rows.shape[0] == 0:
        raise ConfigError(f"{path}: no embedding rows")
    if np.any(rows < 0) or np.any(np.abs(rows.sum(axis=1) - 1.0) > 1e-6):
        raise ConfigError(f"{path}: embedding rows must be probability distributions")
    return rows


def save_embeddings_csv(embeddings: np.ndarray, path: str | Path) -> None:
    embeddings = np.asarray(embeddings, dtype=np.float64)
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"e{i}" for i in range(embeddings.shape[1])])
        for row in embeddings:
            writer.writerow([repr(float(v)) for v in row])


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def stratified_split_indices(
    labels: np.ndarray, first_fraction: float, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Random per-class split: round(first_fraction * N_c) samples of each
    class go to the first side.  Both returned index arrays are sorted.
    Every class must keep at least one sample on each side."""
    labels = np.asarray(labels, dtype=np.int64)
    if not 0.0 < first_fraction < 1.0:
        raise ConfigError(f"fraction must be in (0, 1), got {first_fraction}")
    first: list[np.ndarray] = []
    second: list[np.ndarray] = []
    for c in np.unique(labels):
        idx = np.nonzero(labels == c)[0]
        n_first = _round_half_up(first_fraction * idx.size)
        if not 1 <= n_first <= idx.size - 1:
            raise ConfigError(
                f"class {int(c)}: cannot take {n_first} of {idx.size} samples"
            )
        rng = derive_rng(seed, "stratified", int(c))
        chosen = rng.choice(idx.size, size=n_first, replace=False)
        mask = np.zeros(idx.size, dtype=bool)
        mask[chosen] = True
        first.append(idx[mask])
        second.append(idx[~mask])
    return np.sort(np.concatenate(first)), np.sort(np.concatenate(second))


def perturb_inputs(features: np.ndarray, noise_std: float, seed: int) -> np.ndarray:
    """Additive iid Gaussian jitter; ``noise_std == 0`` returns an identical copy."""
    features = np.asarray(features, dtype=np.float64)
    if noise_std < 0:
        raise ValueError("noise_std must be >= 0")
    if noise_std == 0:
        return features.copy()
    rng = derive_rng(seed, "perturb")
    return features + rng.normal(0.0, noise_std, size=features.shape)


def make_blobs(
    n_per_class: int, centers: np.ndarray, std: float, seed: int
) -> Dataset:
    """Isotropic Gaussian blobs, one per row of ``centers``."""
    centers = np.asarray(centers, dtype=np.float64)
    rng = derive_rng(seed, "blobs")
    feats = []
    labels = []
    for c, center in enumerate(centers):
        feats.append(rng.normal(0.0, std, size=(n_per_class, centers.shape[1])) + center)
        labels.append(np.full(n_per_class, c, dtype=np.int64))
    return Dataset(
        features=np.concatenate(feats),
        labels=np.concatenate(labels),
        class_count=centers.shape[0],
    )


def make_two_mode_benchmark(
    n_samples: int = 2000,
    seed: int = 0,
    *,
    core_scale: float = 1.0,
    core_std: float = 1.0,
    spurious_scale: float = 1.5,
    spurious_std: float = 0.5,
    noise_dims: int = 16,
    embed_sharpness: float = 0.82,
    embed_noise: float = 0.04,
) -> tuple[Dataset, np.ndarray, np.ndarray]:
    """Two-class data where each class mixes two latent modes, plus
    row-stochastic embeddings that expose the modes.

    Features per sample: one core dimension whose sign tracks the label in
    both modes, one spurious dimension aligned with the label in mode 0 but
    anti-aligned in mode 1, and ``noise_dims`` iid standard-normal dimensions.
    A model keying on the spurious dimension transfers badly to data dominated
    by the other mode.

    Embeddings are 4-dimensional distributions: class 0 samples concentrate
    mass on coordinate 0 or 1 according to their mode, class 1 samples on
    coordinate 2 or 3, with Dirichlet-style jitter.  Mode structure is
    therefore visible to a distribution-space splitter, and the two classes
    occupy disjoint coordinate pairs.

    Returns ``(dataset, embeddings, mode_ids)``.
    """
    rng = derive_rng(seed, "two-mode")
    n = int(n_samples)
    labels = rng.integers(0, 2, size=n).astype(np.int64)
    modes = rng.integers(0, 2, size=n).astype(np.int64)

    label_sign = 2.0 * labels - 1.0
    mode_sign = 1.0 - 2.0 * modes  # +1 in mode 0, -1 in mode 1
    core = label_sign * core_scale + rng.normal(0.0, core_std, size=n)
    spurious = label_sign * mode_sign * spurious_scale + rng.normal(
        0.0, spurious_std, size=n
    )
    noise = rng.normal(0.0, 1.0, size=(n, noise_dims))
    features = np.column_stack([core, spurious, noise])

    peak = labels * 2 + modes  # distinct embedding corner per (class, mode)
    raw = rng.uniform(0.0, embed_noise, size=(n, 4))
    raw[np.arange(n), peak] += embed_sharpness
    embeddings = raw / raw.sum(axis=1, keepdims=True)

    dataset = Dataset(features=features, labels=labels, class_count=2)
    return dataset, embeddings, modes
