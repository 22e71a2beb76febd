"""Behavioural clustering, expert election, and prototype ensembling.

Pipeline over a trained model pool:

1. ``extract_signatures`` — each model's concatenated class-probability
   outputs on a probe set become its behavioural signature.
2. ``cluster_models`` — signatures are PCA-reduced and grouped with a
   diagonal GMM, K chosen by mean silhouette.
3. ``elect_experts`` — each cluster elects up to five experts by fixed
   criteria (in order): best validation score, most perturbation-robust,
   most representative (closest to own centroid), most intra-cluster
   anomalous (farthest from own centroid), most outer-anomalous (farthest
   from the other clusters).  Duplicates are kept; ties break to the
   lexicographically smallest model id.
4. ``fuse_prototype`` — elected experts are averaged tensor-wise (every
   tensor, head and carried state included) into one prototype per cluster,
   whose head is then fine-tuned on training data.
5. ``optimize_simplex_weights`` — prototype predictions are blended with
   convex weights fit on validation data.

Validation data is touched only in steps 1, 3, and 5, and each touch is
recorded in the trace.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .checkpoints import atomic_write_text, load_checkpoint, save_checkpoint
from .datasets import Dataset, perturb_inputs
from .divergences import js_rows
from .errors import CheckpointError, ConfigError
from .gmm import gmm_assign, select_k_by_silhouette
from .metrics import balanced_gm_score, predictor_probabilities
from .mlp import Lineage, ModelRecord, fine_tune_head, predict_proba
from .params import NamedParamSet
from .pca import reduce_dim
from .seeding import derive_seed
from .simplex import SimplexWeights, optimize_simplex_weights
from .trace import RunTrace

__all__ = [
    "PredictionSignature",
    "ClusterReport",
    "PerturbationSpec",
    "EnsembleConfig",
    "EnsemblePredictor",
    "extract_signatures",
    "cluster_models",
    "elect_experts",
    "fuse_prototype",
    "build_ensemble",
    "predict_ensemble",
    "save_ensemble",
    "load_ensemble",
    "format_cluster_report",
]

ELECTION_CRITERIA = (
    "top-validation",
    "most-robust",
    "representative",
    "intra-anomalous",
    "outer-anomalous",
)


@dataclass(frozen=True)
class PredictionSignature:
    model_id: str
    vector: np.ndarray  # flattened (n_probe * n_classes,) probabilities

    def __post_init__(self) -> None:
        vec = np.asarray(self.vector, dtype=np.float64).ravel()
        object.__setattr__(self, "vector", vec)


@dataclass(frozen=True)
class PerturbationSpec:
    noise_std: float = 0.05
    n_seeds: int = 3
    seed: int = 0

    def __post_init__(self) -> None:
        if self.noise_std < 0:
            raise ConfigError("noise_std must be >= 0")
        if self.n_seeds < 1:
            raise ConfigError("n_seeds must be >= 1")


@dataclass(frozen=True)
class ClusterReport:
    """Outcome of clustering (and, once elected, the per-cluster experts).

    ``assignments`` maps model id -> cluster id in ``[0, k)``; ``centroids``
    is (k, reduced_dim); ``reduced`` holds each model's reduced coordinates;
    ``elected`` maps cluster id -> tuple of (criterion, model id) pairs.
    ``degenerate`` flags collapsed pools (fewer effective clusters than the
    selector asked for, including the all-identical K=1 case).
    """

    k: int
    assignments: dict[str, int]
    centroids: np.ndarray
    reduced: dict[str, np.ndarray]
    elected: dict[int, tuple[tuple[str, str], ...]] = field(default_factory=dict)
    degenerate: bool = False

    def members(self, cluster_id: int) -> list[str]:
        return sorted(mid for mid, cid in self.assignments.items() if cid == cluster_id)


def extract_signatures(
    pool, probe: Dataset, *, trace: RunTrace | None = None
) -> list[PredictionSignature]:
    """Signature per pool model: its probability outputs on the probe set,
    flattened.  The probe set should be drawn from the validation split;
    each extraction is logged as a label-free validation read.

    Returned sorted by model id, so downstream clustering cannot depend on
    pool ordering.
    """
    records = list(pool.records if hasattr(pool, "records") else pool)
    if not records:
        raise ConfigError("cannot extract signatures from an empty pool")
    out = []
    for record in sorted(records, key=lambda r: r.model_id):
        probs = predict_proba(record, probe.features)
        if trace is not None:
            trace.record("validation-read", "signature-extraction", model_id=record.model_id)
        out.append(PredictionSignature(model_id=record.model_id, vector=probs))
    return out


def cluster_models(
    signatures: Sequence[PredictionSignature],
    *,
    seed: int,
    k_range: tuple[int, int] | None = None,
    target_dim: int | None = None,
    reducer: Callable[[np.ndarray, int], np.ndarray] = reduce_dim,
) -> ClusterReport:
    """Group signatures by behaviour: reduce, fit GMMs over a K range, keep
    the best-silhouette K (smaller K on ties).

    Needs at least 4 signatures.  The default K range is [2, min(8, n / 3)]
    clamped to feasibility; the default reduced dimension is min(8, n - 1).
    Pools whose every candidate K collapses (e.g. all-identical signatures)
    come back as a single degenerate cluster rather than an error.  Empty
    mixture components are dropped and cluster ids relabelled contiguously.
    """
    if len(signatures) < 4:
        raise ConfigError(f"clustering needs >= 4 signatures, got {len(signatures)}")
    ordered = sorted(signatures, key=lambda s: s.model_id)
    ids = [s.model_id for s in ordered]
    if len(set(ids)) != len(ids):
        raise ConfigError("duplicate model ids in signatures")
    lengths = {s.vector.size for s in ordered}
    if len(lengths) != 1:
        raise ConfigError("signatures must share one probe set (vector lengths differ)")
    x = np.stack([s.vector for s in ordered])
    n = x.shape[0]

    t = target_dim if target_dim is not None else min(8, n - 1)
    reduced = np.asarray(reducer(x, t), dtype=np.float64)
    if reduced.shape[0] != n:
        raise ConfigError("reducer returned wrong number of rows")

    if k_range is None:
        k_range = (2, max(2, min(8, n // 3)))
    k_min = max(2, int(k_range[0]))
    k_max = min(int(k_range[1]), n - 1)
    k_max = max(k_max, k_min)

    degenerate = False
    try:
        k, model = select_k_by_silhouette(reduced, (k_min, k_max), seed)
        labels = gmm_assign(model, reduced)
    except ConfigError:
        # Collapsed pool: every K yields < 2 non-empty clusters.
        k = 1
        labels = np.zeros(n, dtype=np.int64)
        degenerate = True

    present = np.unique(labels)
    relabel = {int(old): new for new, old in enumerate(present)}
    labels = np.array([relabel[int(v)] for v in labels], dtype=np.int64)
    k_eff = present.size
    degenerate = degenerate or k_eff < k

    centroids = np.stack([reduced[labels == c].mean(axis=0) for c in range(k_eff)])
    return ClusterReport(
        k=k_eff,
        assignments={mid: int(c) for mid, c in zip(ids, labels)},
        centroids=centroids,
        reduced={mid: reduced[i] for i, mid in enumerate(ids)},
        degenerate=degenerate,
    )


def _argbest(members: list[str], scores: dict[str, float], largest: bool) -> str:
    # Members arrive sorted, so a strict comparison leaves ties with the
    # lexicographically smallest id.
    best = members[0]
    for mid in members[1:]:
        if (scores[mid] > scores[best]) if largest else (scores[mid] < scores[best]):
            best = mid
    return best


def elect_experts(
    report: ClusterReport,
    pool,
    validation: Dataset,
    m: int = 5,
    perturbation: PerturbationSpec | None = None,
    *,
    trace: RunTrace | None = None,
) -> ClusterReport:
    """Elect the first ``m`` of the five criteria per cluster (in the fixed
    ELECTION_CRITERIA order).  A model may win several seats; every seat is
    kept, including duplicates.  Singleton clusters elect the same model for
    every criterion."""
    if not 1 <= m <= len(ELECTION_CRITERIA):
        raise ConfigError(f"m must be in [1, {len(ELECTION_CRITERIA)}]")
    perturbation = perturbation if perturbation is not None else PerturbationSpec()
    by_id = {r.model_id: r for r in (pool.records if hasattr(pool, "records") else pool)}
    missing = set(report.assignments) - set(by_id)
    if missing:
        raise ConfigError(f"pool lacks clustered models: {sorted(missing)}")

    criteria = ELECTION_CRITERIA[:m]
    perturbed_sets = None
    if "most-robust" in criteria:
        perturbed_sets = [
            perturb_inputs(
                validation.features,
                perturbation.noise_std,
                derive_seed(perturbation.seed, "robustness", s),
            )
            for s in range(perturbation.n_seeds)
        ]

    elected: dict[int, tuple[tuple[str, str], ...]] = {}
    for cid in range(report.k):
        members = report.members(cid)
        if not members:
            raise ConfigError(f"cluster {cid} has no members")
        seats: list[tuple[str, str]] = []
        for criterion in criteria:
            if criterion == "top-validation":
                scores = {}
                for mid in members:
                    preds = np.argmax(predict_proba(by_id[mid], validation.features), axis=1)
                    scores[mid] = balanced_gm_score(preds, validation.labels)
                    if trace is not None:
                        trace.record(
                            "validation-query", "election-top-validation", model_id=mid
                        )
                winner = _argbest(members, scores, largest=True)
            elif criterion == "most-robust":
                scores = {}
                for mid in members:
                    clean = predict_proba(by_id[mid], validation.features)
                    drift = 0.0
                    assert perturbed_sets is not None
                    for pert in perturbed_sets:
                        noisy = predict_proba(by_id[mid], pert)
                        drift += float(js_rows(clean, noisy).mean())
                    scores[mid] = drift / len(perturbed_sets)
                    if trace is not None:
                        trace.record("validation-read", "election-most-robust", model_id=mid)
                winner = _argbest(members, scores, largest=False)
            elif criterion == "representative":
                scores = {
                    mid: float(np.linalg.norm(report.reduced[mid] - report.centroids[cid]))
                    for mid in members
                }
                winner = _argbest(members, scores, largest=False)
            elif criterion == "intra-anomalous":
                scores = {
                    mid: float(np.linalg.norm(report.reduced[mid] - report.centroids[cid]))
                    for mid in members
                }
                winner = _argbest(members, scores, largest=True)
            else:  # outer-anomalous
                others = [c for c in range(report.k) if c != cid]
                if others:
                    scores = {
                        mid: min(
                            float(np.linalg.norm(report.reduced[mid] - report.centroids[c]))
                            for c in others
                        )
                        for mid in members
                    }
                else:
                    scores = {mid: 0.0 for mid in members}
                winner = _argbest(members, scores, largest=True)
            seats.append((criterion, winner))
        elected[cid] = tuple(seats)

    return replace(report, elected=elected)


def fuse_prototype(experts: Sequence[NamedParamSet]) -> NamedParamSet:
    """Tensor-wise mean of the expert parameter sets — every tensor, including
    head weights and carried statistics/buffers.

    Duplicates in ``experts`` count with multiplicity.  Identical experts fuse
    to a bitwise copy (short-circuited: a floating-point mean of m equal
    values is not bitwise-exact for every m), and fusing two experts agrees
    bitwise with an alpha=0.5 crossover without mutation.
    """
    experts = list(experts)
    if not experts:
        raise ConfigError("fusion needs at least one expert")
    sig = experts[0].architecture_signature
    if any(e.architecture_signature != sig for e in experts[1:]):
        raise ConfigError("fusion requires matching architecture signatures")
    m = len(experts)
    replacements = {}
    for i, tensor in enumerate(experts[0].tensors):
        stack = [e.tensors[i].values for e in experts]
        if all(np.array_equal(stack[0], arr) for arr in stack[1:]):
            replacements[tensor.name] = stack[0].copy()
        else:
            replacements[tensor.name] = np.add.reduce(stack) / m
    return experts[0].with_tensors(replacements)


@dataclass(frozen=True)
class EnsembleConfig:
    experts_per_cluster: int = 5
    k_range: tuple[int, int] | None = None
    target_dim: int | None = None
    perturbation_noise: float = 0.05
    perturbation_seeds: int = 3
    fine_tune_epochs: int = 1
    weight_max_iter: int = 1000
    weight_tol: float = 1e-6
    seed: int = 0

    def __post_init__(self) -> None:
        if not 1 <= self.experts_per_cluster <= len(ELECTION_CRITERIA):
            raise ConfigError(
                f"experts_per_cluster must be in [1, {len(ELECTION_CRITERIA)}]"
            )
        if self.fine_tune_epochs < 1:
            raise ConfigError("fine_tune_epochs must be >= 1")
        if self.perturbation_noise < 0 or self.perturbation_seeds < 1:
            raise ConfigError("invalid perturbation settings")


@dataclass(frozen=True)
class EnsemblePredictor:
    prototypes: tuple[ModelRecord, ...]
    weights: SimplexWeights

    def __post_init__(self) -> None:
        prototypes = tuple(self.prototypes)
        if not prototypes:
            raise ValueError("ensemble needs at least one prototype")
        if self.weights.values.size != len(prototypes):
            raise ValueError("one weight per prototype required")
        object.__setattr__(self, "prototypes", prototypes)


def build_ensemble(
    pool,
    train_data: Dataset,
    validation_data: Dataset,
    m: int,
    config: EnsembleConfig,
    *,
    trace: RunTrace | None = None,
) -> tuple[EnsemblePredictor, ClusterReport]:
    """Full pipeline from pool to weighted prototype ensemble.

    Returns the predictor and the cluster report (with elections) that
    produced it.  Validation usage: signature extraction (reads), election
    scoring (N label queries + reads), and the final weight fit (one query
    per prototype) — never during fusion or head fine-tuning.
    """
    signatures = extract_signatures(pool, validation_data, trace=trace)
    report = cluster_models(
        signatures, seed=config.seed, k_range=config.k_range, target_dim=config.target_dim
    )
    perturbation = PerturbationSpec(
        noise_std=config.perturbation_noise,
        n_seeds=config.perturbation_seeds,
        seed=derive_seed(config.seed, "perturbation"),
    )
    report = elect_experts(report, pool, validation_data, m, perturbation, trace=trace)

    by_id = {r.model_id: r for r in (pool.records if hasattr(pool, "records") else pool)}
    prototypes: list[ModelRecord] = []
    for cid in range(report.k):
        seats = report.elected[cid]
        expert_params = [by_id[mid].params for _, mid in seats]
        fused = fuse_prototype(expert_params)
        base = by_id[seats[0][1]]
        proto = ModelRecord(
            model_id=f"proto-{cid}",
            params=fused,
            config=base.config,
            lineage=Lineage.gradient(),
            generation=max(by_id[mid].generation for _, mid in seats),
        )
        proto = fine_tune_head(proto, train_data, config.fine_tune_epochs)
        if trace is not None:
            trace.record(
                "fine-tune",
                "prototype",
                model_id=proto.model_id,
                experts=[mid for _, mid in seats],
            )
        prototypes.append(proto)

    predictions = np.stack(
        [predict_proba(p, validation_data.features) for p in prototypes]
    )
    weights = optimize_simplex_weights(
        predictions,
        validation_data.labels,
        max_iter=config.weight_max_iter,
        tol=config.weight_tol,
    )
    if trace is not None:
        for p in prototypes:
            trace.record("validation-query", "weight-optimization", model_id=p.model_id)

    return EnsemblePredictor(prototypes=tuple(prototypes), weights=weights), report


def predict_ensemble(ensemble: EnsemblePredictor, features: np.ndarray) -> np.ndarray:
    """Convex blend of prototype probabilities; rows remain distributions."""
    return predictor_probabilities(ensemble, features)


def save_ensemble(ensemble: EnsemblePredictor, directory: str | Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_checkpoint(list(ensemble.prototypes), directory / "prototypes.ckpt")
    atomic_write_text(
        directory / "weights.json",
        json.dumps({"weights": [repr(float(w)) for w in ensemble.weights.values]}),
    )


def load_ensemble(directory: str | Path) -> EnsemblePredictor:
    directory = Path(directory)
    records = load_checkpoint(directory / "prototypes.ckpt")
    try:
        payload = json.loads((directory / "weights.json").read_text(encoding="utf-8"))
        weights = np.array([float(w) for w in payload["weights"]])
    except (OSError, KeyError, ValueError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{directory}: unreadable ensemble weights ({exc})") from exc
    return EnsemblePredictor(prototypes=tuple(records), weights=SimplexWeights(values=weights))


def format_cluster_report(report: ClusterReport) -> str:
    """Human-readable summary (stable ordering, no timestamps)."""
    lines = [f"clusters: {report.k}" + ("  [degenerate]" if report.degenerate else "")]
    for cid in range(report.k):
        members = report.members(cid)
        lines.append(f"cluster {cid} ({len(members)} members): {', '.join(members)}")
        for criterion, mid in report.elected.get(cid, ()):
            lines.append(f"  {criterion:>16s} -> {mid}")
    return "\n".join(lines) + "\n"
