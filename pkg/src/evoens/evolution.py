"""Evolutionary model-pool generation without validation feedback.

``evolve_pool`` grows a pool of ``pool_size`` models over ``generations``
rounds, banking ``pool_size / generations`` randomly chosen offspring per
round.  Each round: pair random parents from the evolving set, blend their
parameters (``crossover_mutate``), lightly fine-tune each child's head on
training data, bank a random subset of children into the output pool, then
retrain the remaining children under freshly sampled configs and add fresh
random initializations to keep the evolving set diverse.

Nothing in this module accepts validation data; selection into the pool is
random by construction, so the pool's generation cost in validation queries
is exactly zero.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .datasets import Dataset
from .errors import ConfigError
from .mlp import LearnerConfig, Lineage, ModelRecord, fine_tune_head, train
from .params import NamedParamSet, NamedTensor
from .seeding import derive_rng, derive_seed
from .trace import RunTrace

__all__ = ["EvolutionConfig", "LearnerConfigSpace", "ModelPool", "crossover_mutate", "evolve_pool"]


@dataclass(frozen=True)
class LearnerConfigSpace:
    """Discrete distribution over learner configs used for diversity.

    ``sample`` draws width, dropout, augmentation noise, epoch count, and a
    fresh seed; ``pin_width`` narrows the width choices so every config drawn
    within one evolutionary run shares an architecture (a requirement for
    parameter-space crossover).
    """

    hidden_widths: tuple[int, ...] = (16, 32, 64)
    dropout_rates: tuple[float, ...] = (0.0, 0.1, 0.2)
    augmentation_noises: tuple[float, ...] = (0.0, 0.01, 0.05)
    epochs_choices: tuple[int, ...] = (1, 2, 3)
    learning_rate: float = 1e-2
    batch_size: int = 32
    activation: str = "relu"

    def __post_init__(self) -> None:
        if not self.hidden_widths or not self.dropout_rates:
            raise ConfigError("config space must offer at least one choice per axis")
        if not self.augmentation_noises or not self.epochs_choices:
            raise ConfigError("config space must offer at least one choice per axis")
        if any(e < 1 or e > 3 for e in self.epochs_choices):
            raise ConfigError("epoch choices for pool generation must stay within [1, 3]")

    def pin_width(self, width: int) -> "LearnerConfigSpace":
        if width not in self.hidden_widths:
            raise ConfigError(f"width {width} not offered by this space")
        return replace(self, hidden_widths=(width,))

    def sample(self, rng: np.random.Generator) -> LearnerConfig:
        return LearnerConfig(
            hidden_width=int(rng.choice(self.hidden_widths)),
            activation=self.activation,
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            epochs=int(rng.choice(self.epochs_choices)),
            dropout_rate=float(rng.choice(self.dropout_rates)),
            augmentation_noise=float(rng.choice(self.augmentation_noises)),
            seed=int(rng.integers(0, 2**62)),
        )


@dataclass(frozen=True)
class EvolutionConfig:
    pool_size: int = 20
    generations: int = 4
    offspring_per_generation: int = 8
    fresh_per_generation: int = 3
    alpha: float = 0.5
    mutation_rate: float = 0.05
    mutation_std: float = 0.01
    fine_tune_epochs: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.pool_size < 1 or self.generations < 1:
            raise ConfigError("pool_size and generations must be >= 1")
        if self.pool_size % self.generations != 0:
            raise ConfigError(
                f"pool_size {self.pool_size} must be divisible by generations {self.generations}"
            )
        if self.offspring_per_generation < self.per_generation_quota:
            raise ConfigError(
                "offspring_per_generation must cover the per-generation pool quota"
            )
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError("alpha must be in [0, 1]")
        if not 0.0 <= self.mutation_rate <= 1.0:
            raise ConfigError("mutation_rate must be in [0, 1]")
        if self.mutation_std < 0:
            raise ConfigError("mutation_std must be >= 0")
        if self.fresh_per_generation < 0:
            raise ConfigError("fresh_per_generation must be >= 0")
        if self.fine_tune_epochs < 1:
            raise ConfigError("fine_tune_epochs must be >= 1")

    @property
    def per_generation_quota(self) -> int:
        return self.pool_size // self.generations


@dataclass(frozen=True)
class ModelPool:
    records: tuple[ModelRecord, ...]

    def __post_init__(self) -> None:
        records = tuple(self.records)
        if not records:
            raise ValueError("a model pool cannot be empty")
        ids = [r.model_id for r in records]
        if len(set(ids)) != len(ids):
            raise ValueError("pool model ids must be unique")
        signatures = {r.params.architecture_signature for r in records}
        if len(signatures) != 1:
            raise ValueError("pool members must share one architecture signature")
        object.__setattr__(self, "records", records)

    @property
    def architecture_signature(self) -> str:
        return self.records[0].params.architecture_signature

    def __len__(self) -> int:
        return len(self.records)

    def by_id(self, model_id: str) -> ModelRecord:
        for r in self.records:
            if r.model_id == model_id:
                return r
        raise KeyError(model_id)


def crossover_mutate(
    parent_a: NamedParamSet,
    parent_b: NamedParamSet,
    alpha: float,
    mutation_rate: float,
    mutation_std: float,
    seed: int,
) -> NamedParamSet:
    """Tensor-wise convex blend ``alpha * a + (1 - alpha) * b`` with optional
    Gaussian mutation.

    Mutation noise (std ``mutation_std``) hits each *trainable* tensor
    independently with probability ``mutation_rate``; normalization statistics
    and buffers are blended but never mutated.  Identity contracts hold
    bitwise: identical parents (or ``alpha`` at 0/1) with no mutation return a
    bitwise copy of the surviving parent — see the short-circuits, which exist
    because ``alpha*x + (1-alpha)*x`` is not bitwise ``x`` for general alpha
    in floating point.
    """
    if parent_a.architecture_signature != parent_b.architecture_signature:
        raise ConfigError("crossover requires matching architecture signatures")
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError("alpha must be in [0, 1]")
    if not 0.0 <= mutation_rate <= 1.0:
        raise ConfigError("mutation_rate must be in [0, 1]")
    if mutation_std < 0:
        raise ConfigError("mutation_std must be >= 0")

    rng = derive_rng(seed, "crossover")
    out: list[NamedTensor] = []
    for ta, tb in zip(parent_a.tensors, parent_b.tensors):
        a, b = ta.values, tb.values
        if alpha == 1.0 or np.array_equal(a, b):
            blended = a.copy()
        elif alpha == 0.0:
            blended = b.copy()
        else:
            blended = alpha * a + (1.0 - alpha) * b
        if ta.role.trainable and mutation_rate > 0 and rng.uniform() < mutation_rate:
            blended = blended + rng.normal(0.0, mutation_std, size=blended.shape)
        out.append(ta.with_values(blended))
    return NamedParamSet(tensors=tuple(out))


def _sample_config(space: LearnerConfigSpace, seed: int, *path) -> LearnerConfig:
    return space.sample(derive_rng(seed, *path))


def evolve_pool(
    config: EvolutionConfig,
    train_data: Dataset,
    space: LearnerConfigSpace,
    *,
    trace: RunTrace | None = None,
) -> ModelPool:
    """Run the generational loop and return the banked pool.

    Deterministic given ``config.seed``: the hidden width is pinned once per
    run (crossover needs a shared architecture), per-task seeds are derived by
    position, and model ids encode provenance (``g0-m*`` initial, ``g{k}-c*``
    offspring, ``g{k}-r*`` retrained, ``g{k}-n*`` fresh).  Banked offspring
    carry ``genetic`` lineage with both parent ids.
    """
    trace = trace if trace is not None else RunTrace()
    width_rng = derive_rng(config.seed, "width")
    pinned = space.pin_width(int(width_rng.choice(space.hidden_widths)))
    quota = config.per_generation_quota

    evolving: list[ModelRecord] = []
    for i in range(config.pool_size):
        cfg = _sample_config(pinned, config.seed, "gen0", i)
        record = train(cfg, train_data, model_id=f"g0-m{i:03d}", generation=0)
        trace.record("train", "generation-0", model_id=record.model_id, epochs=cfg.epochs)
        evolving.append(record)
    if len(evolving) < 2:
        raise ConfigError("pool generation needs at least two models to pair parents")

    banked: list[ModelRecord] = []
    for g in range(1, config.generations + 1):
        parent_rng = derive_rng(config.seed, "parents", g)
        children: list[ModelRecord] = []
        for j in range(config.offspring_per_generation):
            ia, ib = parent_rng.choice(len(evolving), size=2, replace=False)
            pa, pb = evolving[int(ia)], evolving[int(ib)]
            child_seed = derive_seed(config.seed, "child", g, j)
            child_params = crossover_mutate(
                pa.params,
                pb.params,
                config.alpha,
                config.mutation_rate,
                config.mutation_std,
                child_seed,
            )
            child_cfg = _sample_config(pinned, config.seed, "child-config", g, j)
            child = ModelRecord(
                model_id=f"g{g}-c{j:03d}",
                params=child_params,
                config=child_cfg,
                lineage=Lineage.genetic(pa.model_id, pb.model_id),
                generation=g,
            )
            child = fine_tune_head(child, train_data, config.fine_tune_epochs)
            trace.record(
                "fine-tune",
                f"generation-{g}",
                model_id=child.model_id,
                parents=[pa.model_id, pb.model_id],
            )
            children.append(child)

        select_rng = derive_rng(config.seed, "select", g)
        chosen = set(
            int(i)
            for i in select_rng.choice(len(children), size=quota, replace=False)
        )
        trace.record(
            "selection",
            f"generation-{g}",
            chosen=[children[i].model_id for i in sorted(chosen)],
        )
        banked.extend(children[i] for i in sorted(chosen))

        next_evolving: list[ModelRecord] = []
        for j, child in enumerate(children):
            if j in chosen:
                continue
            cfg = _sample_config(pinned, config.seed, "retrain-config", g, j)
            retrained = train(
                cfg, train_data, init=child.params, model_id=f"g{g}-r{j:03d}", generation=g
            )
            trace.record("train", f"generation-{g}", model_id=retrained.model_id, epochs=cfg.epochs)
            next_evolving.append(retrained)
        for t in range(config.fresh_per_generation):
            cfg = _sample_config(pinned, config.seed, "fresh", g, t)
            fresh = train(cfg, train_data, model_id=f"g{g}-n{t:03d}", generation=g)
            trace.record("train", f"generation-{g}", model_id=fresh.model_id, epochs=cfg.epochs)
            next_evolving.append(fresh)
        if len(next_evolving) >= 2:
            evolving = next_evolving
        # Degenerate configs (all offspring banked, no fresh blood) keep the
        # previous evolving set so parent pairing stays well-defined.

    return ModelPool(records=tuple(banked))
