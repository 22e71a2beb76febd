"""Validation-hungry reference strategies the pipeline is compared against.

``baseline_single``: train N independent models, score every per-epoch
checkpoint on validation, return the argmax — the classic protocol whose
validation-query count is exactly N x q and whose winner is selected *because*
it looked good on validation (optimism included).

``baseline_inc_ens``: greedy incremental ensembling; at each step add the
candidate that most lowers the uniform-average blended cross-entropy on
validation, logging one query per (step, candidate) examined.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .datasets import Dataset
from .errors import ConfigError
from .evolution import LearnerConfigSpace
from .metrics import balanced_gm_score
from .mlp import ModelRecord, predict_proba, train
from .prototypes import EnsemblePredictor
from .seeding import derive_rng, derive_seed
from .simplex import SimplexWeights, blended_cross_entropy
from .trace import RunTrace

__all__ = ["SingleBaselineResult", "IncEnsResult", "baseline_single", "baseline_inc_ens"]


@dataclass(frozen=True)
class SingleBaselineResult:
    checkpoints: tuple[tuple[ModelRecord, ...], ...]  # [run][epoch]
    val_scores: np.ndarray  # (N, q) validation G-mean per checkpoint
    best_run: int
    best_checkpoint: int

    @property
    def record(self) -> ModelRecord:
        return self.checkpoints[self.best_run][self.best_checkpoint]

    @property
    def best_val_score(self) -> float:
        return float(self.val_scores[self.best_run, self.best_checkpoint])

    def per_model_best(self) -> list[ModelRecord]:
        """Each run's best-validation checkpoint (ties to the earliest epoch)."""
        return [
            self.checkpoints[i][int(np.argmax(self.val_scores[i]))]
            for i in range(len(self.checkpoints))
        ]


def baseline_single(
    n_models: int,
    n_checkpoints: int,
    train_data: Dataset,
    validation_data: Dataset,
    space: LearnerConfigSpace,
    *,
    seed: int = 0,
    trace: RunTrace | None = None,
) -> SingleBaselineResult:
    """Train ``n_models`` runs for ``n_checkpoints`` epochs each, snapshot
    after every epoch, and select the checkpoint with the best validation
    G-mean (ties to the earliest (run, epoch) in scan order).  Logs exactly
    ``n_models * n_checkpoints`` validation queries."""
    if n_models < 1 or n_checkpoints < 1:
        raise ConfigError("n_models and n_checkpoints must be >= 1")
    runs: list[tuple[ModelRecord, ...]] = []
    scores = np.zeros((n_models, n_checkpoints))
    for i in range(n_models):
        cfg = space.sample(derive_rng(seed, "single-config", i))
        snapshots: list[ModelRecord] = []
        current: ModelRecord | None = None
        for t in range(n_checkpoints):
            segment_cfg = replace(
                cfg, epochs=1, seed=derive_seed(seed, "single-epoch", i, t)
            )
            current = train(
                segment_cfg,
                train_data,
                init=None if current is None else current.params,
                model_id=f"single-{i:03d}-e{t}",
            )
            if trace is not None:
                trace.record("train", "single-baseline", model_id=current.model_id, epochs=1)
            preds = np.argmax(predict_proba(current, validation_data.features), axis=1)
            scores[i, t] = balanced_gm_score(preds, validation_data.labels)
            if trace is not None:
                trace.record(
                    "validation-query",
                    "single-selection",
                    model_id=current.model_id,
                    run=i,
                    checkpoint=t,
                )
            snapshots.append(current)
        runs.append(tuple(snapshots))

    flat_best = int(np.argmax(scores))  # first maximum wins: scan order (run, epoch)
    return SingleBaselineResult(
        checkpoints=tuple(runs),
        val_scores=scores,
        best_run=flat_best // n_checkpoints,
        best_checkpoint=flat_best % n_checkpoints,
    )


@dataclass(frozen=True)
class IncEnsResult:
    ensemble: EnsemblePredictor
    order: tuple[str, ...]
    step_losses: tuple[float, ...]  # blended validation loss after each accepted step


def baseline_inc_ens(
    pool,
    k: int,
    validation_data: Dataset,
    *,
    trace: RunTrace | None = None,
) -> IncEnsResult:
    """Greedy forward selection of ``k`` members minimizing the uniform-average
    blended cross-entropy on validation.

    At step j, every remaining candidate is evaluated as the (j+1)-th member
    of a uniform ensemble (one validation query each); the best candidate
    (ties to the smallest model id) is kept.  Total queries:
    sum_{j=0..k-1} (N - j).
    """
    records = sorted(
        (pool.records if hasattr(pool, "records") else pool), key=lambda r: r.model_id
    )
    if not records:
        raise ConfigError("candidate pool is empty")
    if not 1 <= k <= len(records):
        raise ConfigError(f"k={k} infeasible for a pool of {len(records)}")
    preds = {
        r.model_id: predict_proba(r, validation_data.features) for r in records
    }
    by_id = {r.model_id: r for r in records}

    chosen: list[str] = []
    step_losses: list[float] = []
    for step in range(k):
        best_id: str | None = None
        best_loss = np.inf
        for r in records:
            if r.model_id in chosen:
                continue
            stack = np.stack([preds[mid] for mid in chosen + [r.model_id]])
            uniform = np.full(stack.shape[0], 1.0 / stack.shape[0])
            loss = blended_cross_entropy(uniform, stack, validation_data.labels)
            if trace is not None:
                trace.record(
                    "validation-query",
                    "inc-ens-selection",
                    step=step,
                    model_id=r.model_id,
                )
            if loss < best_loss:  # strict: ties keep the earlier (smaller) id
                best_loss = loss
                best_id = r.model_id
        assert best_id is not None
        chosen.append(best_id)
        step_losses.append(best_loss)

    ensemble = EnsemblePredictor(
        prototypes=tuple(by_id[mid] for mid in chosen),
        weights=SimplexWeights(values=np.full(len(chosen), 1.0 / len(chosen))),
    )
    return IncEnsResult(
        ensemble=ensemble, order=tuple(chosen), step_losses=tuple(step_losses)
    )
