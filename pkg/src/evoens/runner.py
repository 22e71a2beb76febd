"""Benchmark orchestration: split, run, report.

A run directory is a deterministic function of the config file: every stage
derives its seeds from the config, writes its artifacts atomically, and marks
completion by writing its ``row.json`` last.  Re-running the same config is
byte-identical (``timings.tsv`` excluded — wall time is the one thing allowed
to differ), and a killed run resumes by skipping any stage whose completion
marker exists, recomputing in-memory prerequisites as needed.

Layout::

    out/
      config_used.ini
      split/{train_ids.txt, test_ids.txt, split_meta.json}
      seeds/<seed>/{val_ids.txt, fit_ids.txt}
      seeds/<seed>/methods/<method>/{row.json, trace.jsonl, artifacts...}
      plots/<method>_<metric>.tsv
      report.tsv
      timings.tsv

Methods: ``single`` (argmax-validation checkpoint over N x q), ``inc-ens``
(greedy forward ensemble over the same monitored pool), ``evo-ens``
(validation-free pool generation + prototype ensemble).  ``single`` and
``inc-ens`` intentionally share one monitored training sweep per seed so the
baseline comparison holds the training budget fixed.
"""

from __future__ import annotations

import json
import time
from dataclasses import replace
from pathlib import Path
from typing import Callable

import numpy as np

from .baselines import SingleBaselineResult, baseline_inc_ens, baseline_single
from .checkpoints import atomic_write_text, save_checkpoint
from .datasets import (
    Dataset,
    load_dataset_csv,
    load_embeddings_csv,
    stratified_split_indices,
)
from .errors import ConfigError, EvoensError
from .metrics import balanced_gm_score, predictor_labels
from .optimism import OptimismSimConfig, simulate_optimism
from .prototypes import build_ensemble, format_cluster_report, save_ensemble
from .evolution import evolve_pool
from .runconfig import RunConfig
from .seeding import derive_seed
from .splitting import jsd_guided_split, pretext_softmax_embeddings
from .trace import RunTrace
from .checkpoints import load_checkpoint

__all__ = ["cmd_split", "cmd_run", "cmd_report", "simulate_optimism_report", "inspect_pool_text"]

StageHook = Callable[[str], None]

_REPORT_COLUMNS = (
    "method",
    "seed",
    "status",
    "n_train",
    "n_val",
    "n_test",
    "train_gm",
    "val_gm",
    "test_gm",
    "vo_gap_x1000",
    "to_gap_x1000",
    "validation_queries",
    "test_queries",
    "detail",
)


def _write_ids(path: Path, ids: np.ndarray) -> None:
    atomic_write_text(path, "".join(f"{int(i)}\n" for i in ids))


def _read_ids(path: Path) -> np.ndarray:
    return np.array(
        [int(line) for line in path.read_text().splitlines() if line.strip()],
        dtype=np.int64,
    )


def _json_text(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _compute_split(config: RunConfig, dataset: Dataset) -> tuple[np.ndarray, np.ndarray, dict]:
    if config.split_mode == "random":
        train_ids, test_ids = stratified_split_indices(
            dataset.labels, config.split.train_ratio, config.split.seed
        )
        meta = {
            "mode": "random",
            "train_ratio": config.split.train_ratio,
            "seed": config.split.seed,
            "n_train": int(train_ids.size),
            "n_test": int(test_ids.size),
        }
        return train_ids, test_ids, meta

    if config.encoder == "file":
        assert config.embeddings_path is not None
        embeddings = load_embeddings_csv(config.embeddings_path)
        if embeddings.shape[0] != dataset.n_samples:
            raise ConfigError(
                f"embeddings rows ({embeddings.shape[0]}) != dataset rows ({dataset.n_samples})"
            )
    else:
        embeddings = pretext_softmax_embeddings(
            dataset.features,
            n_outputs=config.encoder_outputs,
            seed=derive_seed(config.split.seed, "encoder"),
        )
    result = jsd_guided_split(embeddings, dataset.labels, config.split)
    meta = {"mode": "guided", "encoder": config.encoder}
    meta.update(result.to_metadata(config.split))
    return result.train_ids, result.test_ids, meta


def cmd_split(config: RunConfig) -> dict[str, Path]:
    """Compute and write the train/test split.  Deterministic and idempotent:
    re-running overwrites with identical bytes."""
    dataset = load_dataset_csv(config.dataset_path)
    train_ids, test_ids, meta = _compute_split(config, dataset)
    split_dir = config.output_dir / "split"
    split_dir.mkdir(parents=True, exist_ok=True)
    _write_ids(split_dir / "train_ids.txt", train_ids)
    _write_ids(split_dir / "test_ids.txt", test_ids)
    atomic_write_text(split_dir / "split_meta.json", _json_text(meta))
    return {
        "train_ids": split_dir / "train_ids.txt",
        "test_ids": split_dir / "test_ids.txt",
        "meta": split_dir / "split_meta.json",
    }


def _gm(predictor, data: Dataset) -> float:
    return balanced_gm_score(predictor_labels(predictor, data.features), data.labels)


class _SeedContext:
    """Shared deterministic prerequisites for one benchmark seed."""

    def __init__(
        self,
        config: RunConfig,
        seed: int,
        fit: Dataset,
        val: Dataset,
        test: Dataset,
    ) -> None:
        self.config = config
        self.seed = seed
        self.fit = fit
        self.val = val
        self.test = test
        self._monitored: tuple[SingleBaselineResult, list] | None = None

    def monitored_pool(self) -> tuple[SingleBaselineResult, list]:
        """The validation-monitored training sweep shared by ``single`` and
        ``inc-ens`` (lazy; recomputed identically on resume)."""
        if self._monitored is None:
            trace = RunTrace()
            result = baseline_single(
                self.config.single_models,
                self.config.single_checkpoints,
                self.fit,
                self.val,
                self.config.space,
                seed=derive_seed(self.seed, "single"),
                trace=trace,
            )
            self._monitored = (result, list(trace.events))
        return self._monitored


def _run_single(ctx: _SeedContext, method_dir: Path) -> dict:
    result, pool_events = ctx.monitored_pool()
    trace = RunTrace(events=list(pool_events))
    record = result.record

    n_ckpt = ctx.config.single_checkpoints
    series = {"train_gm": [], "val_gm": [], "test_gm": []}
    for t in range(n_ckpt):
        col = [result.checkpoints[i][t] for i in range(len(result.checkpoints))]
        series["train_gm"].append(float(np.mean([_gm(r, ctx.fit) for r in col])))
        series["val_gm"].append(float(np.mean(result.val_scores[:, t])))
        for r in col:
            trace.record("test-query", "evaluation", model_id=r.model_id, checkpoint=t)
        series["test_gm"].append(float(np.mean([_gm(r, ctx.test) for r in col])))
    atomic_write_text(method_dir / "series.json", _json_text(series))

    save_checkpoint([record], method_dir / "model.ckpt")
    trace.record("test-query", "evaluation", model_id=record.model_id)
    row = _evaluate(record, ctx, trace)
    row["detail"] = f"selected={record.model_id}"
    trace.write_jsonl(method_dir / "trace.jsonl")
    return row


def _run_inc_ens(ctx: _SeedContext, method_dir: Path) -> dict:
    result, pool_events = ctx.monitored_pool()
    trace = RunTrace(events=list(pool_events))
    candidates = result.per_model_best()
    inc = baseline_inc_ens(candidates, ctx.config.inc_ens_k, ctx.val, trace=trace)
    atomic_write_text(
        method_dir / "series.json", _json_text({"val_loss": list(inc.step_losses)})
    )
    save_checkpoint(list(inc.ensemble.prototypes), method_dir / "members.ckpt")
    trace.record("test-query", "evaluation", model_id="inc-ens")
    row = _evaluate(inc.ensemble, ctx, trace)
    row["detail"] = "members=" + "|".join(inc.order)
    trace.write_jsonl(method_dir / "trace.jsonl")
    return row


def _run_evo_ens(ctx: _SeedContext, method_dir: Path) -> dict:
    trace = RunTrace()
    evo_cfg = replace(ctx.config.evolution, seed=derive_seed(ctx.seed, "pool-gen"))
    pool = evolve_pool(evo_cfg, ctx.fit, ctx.config.space, trace=trace)
    save_checkpoint(list(pool.records), method_dir / "pool.ckpt")

    generations = sorted({r.generation for r in pool.records})
    gen_series = [
        float(
            np.mean([_gm(r, ctx.fit) for r in pool.records if r.generation == g])
        )
        for g in generations
    ]
    atomic_write_text(method_dir / "series.json", _json_text({"train_gm": gen_series}))

    ens_cfg = replace(ctx.config.ensemble, seed=derive_seed(ctx.seed, "ensemble"))
    ensemble, report = build_ensemble(
        pool, ctx.fit, ctx.val, ens_cfg.experts_per_cluster, ens_cfg, trace=trace
    )
    save_ensemble(ensemble, method_dir / "ensemble")
    atomic_write_text(method_dir / "cluster_report.txt", format_cluster_report(report))
    trace.record("test-query", "evaluation", model_id="evo-ens")
    row = _evaluate(ensemble, ctx, trace)
    weights = ",".join(f"{w:.4f}" for w in ensemble.weights.values)
    row["detail"] = (
        f"clusters={report.k}{' degenerate' if report.degenerate else ''};weights={weights}"
    )
    trace.write_jsonl(method_dir / "trace.jsonl")
    return row


def _evaluate(predictor, ctx: _SeedContext, trace: RunTrace) -> dict:
    train_gm = _gm(predictor, ctx.fit)
    val_gm = _gm(predictor, ctx.val)
    test_gm = _gm(predictor, ctx.test)
    return {
        "status": "ok",
        "n_train": ctx.fit.n_samples,
        "n_val": ctx.val.n_samples,
        "n_test": ctx.test.n_samples,
        "train_gm": train_gm,
        "val_gm": val_gm,
        "test_gm": test_gm,
        "vo_gap_x1000": (val_gm - test_gm) * 1e3,
        "to_gap_x1000": (train_gm - val_gm) * 1e3,
        "validation_queries": trace.validation_query_count,
        "test_queries": trace.test_query_count,
    }


_METHOD_RUNNERS = {
    "single": _run_single,
    "inc-ens": _run_inc_ens,
    "evo-ens": _run_evo_ens,
}


def cmd_run(config: RunConfig, *, stage_hook: StageHook | None = None) -> Path:
    """Execute the configured benchmark and return the report path.

    ``stage_hook`` is called with a label before each stage executes (used by
    tests to inject interruptions); completed stages are skipped on re-run.
    """
    out = config.output_dir
    out.mkdir(parents=True, exist_ok=True)
    atomic_write_text(out / "config_used.ini", config.source_text)
    dataset = load_dataset_csv(config.dataset_path)
    timings: list[tuple[str, float]] = []

    def run_stage(label: str, fn):
        if stage_hook is not None:
            stage_hook(label)
        started = time.perf_counter()
        value = fn()
        timings.append((label, time.perf_counter() - started))
        return value

    split_dir = out / "split"
    if not (split_dir / "split_meta.json").exists():
        run_stage("split", lambda: cmd_split(config))
    train_ids = _read_ids(split_dir / "train_ids.txt")
    test_ids = _read_ids(split_dir / "test_ids.txt")
    test_ds = dataset.subset(test_ids)

    rows: dict[tuple[str, int], dict] = {}
    for seed in config.seeds:
        seed_dir = out / "seeds" / str(seed)
        seed_dir.mkdir(parents=True, exist_ok=True)
        val_path = seed_dir / "val_ids.txt"
        if not val_path.exists():

            def write_val() -> None:
                train_labels = dataset.labels[train_ids]
                val_rel, fit_rel = stratified_split_indices(
                    train_labels, config.validation_fraction, derive_seed(seed, "val-split")
                )
                _write_ids(val_path, train_ids[val_rel])
                _write_ids(seed_dir / "fit_ids.txt", train_ids[fit_rel])

            run_stage(f"seed{seed}:val", write_val)
        val_ids = _read_ids(val_path)
        fit_ids = _read_ids(seed_dir / "fit_ids.txt")
        ctx = _SeedContext(
            config, seed, dataset.subset(fit_ids), dataset.subset(val_ids), test_ds
        )

        for method in config.methods:
            method_dir = seed_dir / "methods" / method
            row_path = method_dir / "row.json"
            if row_path.exists():
                rows[(method, seed)] = json.loads(row_path.read_text())
                continue
            method_dir.mkdir(parents=True, exist_ok=True)

            def execute(method=method, method_dir=method_dir, row_path=row_path) -> dict:
                try:
                    row = _METHOD_RUNNERS[method](ctx, method_dir)
                except EvoensError as exc:
                    row = {"status": "failed", "detail": str(exc).replace("\n", " ")}
                row["method"] = method
                row["seed"] = ctx.seed
                atomic_write_text(row_path, _json_text(row))
                return row

            rows[(method, seed)] = run_stage(f"seed{seed}:{method}", execute)

    if stage_hook is not None:
        stage_hook("assemble")
    report_path = _assemble_report(config, rows)
    _assemble_plots(config)
    if timings:
        text = "stage\twall_seconds\n" + "".join(
            f"{label}\t{secs:.3f}\n" for label, secs in timings
        )
        atomic_write_text(out / "timings.tsv", text)
    return report_path


def _format_cell(row: dict, column: str) -> str:
    if column not in row or row[column] is None:
        return "-"
    value = row[column]
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def _assemble_report(config: RunConfig, rows: dict[tuple[str, int], dict]) -> Path:
    lines = ["\t".join(_REPORT_COLUMNS)]
    for seed in config.seeds:
        for method in config.methods:
            row = rows[(method, seed)]
            lines.append("\t".join(_format_cell(row, c) for c in _REPORT_COLUMNS))
    path = config.output_dir / "report.tsv"
    atomic_write_text(path, "\n".join(lines) + "\n")
    return path


def _assemble_plots(config: RunConfig) -> None:
    """Merge per-seed series into one TSV per (method, metric)."""
    plots = config.output_dir / "plots"
    series_by_method: dict[str, dict[int, dict]] = {}
    for seed in config.seeds:
        for method in config.methods:
            path = config.output_dir / "seeds" / str(seed) / "methods" / method / "series.json"
            if path.exists():
                series_by_method.setdefault(method, {})[seed] = json.loads(path.read_text())
    for method, by_seed in series_by_method.items():
        metrics = sorted({m for s in by_seed.values() for m in s})
        for metric in metrics:
            seeds = [s for s in config.seeds if s in by_seed and metric in by_seed[s]]
            if not seeds:
                continue
            length = max(len(by_seed[s][metric]) for s in seeds)
            lines = ["step\t" + "\t".join(f"seed{s}" for s in seeds)]
            for t in range(length):
                cells = [str(t)]
                for s in seeds:
                    vals = by_seed[s][metric]
                    cells.append(f"{vals[t]:.6f}" if t < len(vals) else "-")
                lines.append("\t".join(cells))
            plots.mkdir(parents=True, exist_ok=True)
            atomic_write_text(plots / f"{method}_{metric}.tsv", "\n".join(lines) + "\n")


def cmd_report(run_dir: str | Path) -> Path:
    """Aggregate a finished (or partial) run directory into summary.tsv:
    per-method medians and inter-quartile ranges over the ok rows."""
    run_dir = Path(run_dir)
    row_paths = sorted(run_dir.glob("seeds/*/methods/*/row.json"))
    if not row_paths:
        raise ConfigError(f"no benchmark rows found under {run_dir}")
    rows = [json.loads(p.read_text()) for p in row_paths]

    methods = sorted({r["method"] for r in rows})
    metrics = ("val_gm", "test_gm", "vo_gap_x1000", "to_gap_x1000", "validation_queries")
    lines = ["method\tn_ok\tn_failed\t" + "\t".join(f"{m}_median\t{m}_iqr" for m in metrics)]
    for method in methods:
        ok = [r for r in rows if r["method"] == method and r["status"] == "ok"]
        failed = sum(1 for r in rows if r["method"] == method and r["status"] != "ok")
        cells = [method, str(len(ok)), str(failed)]
        for metric in metrics:
            if ok:
                vals = np.array([float(r[metric]) for r in ok])
                cells.append(f"{np.median(vals):.6f}")
                cells.append(f"{np.percentile(vals, 75) - np.percentile(vals, 25):.6f}")
            else:
                cells.extend(["-", "-"])
        lines.append("\t".join(cells))
    path = run_dir / "summary.tsv"
    atomic_write_text(path, "\n".join(lines) + "\n")
    return path


def simulate_optimism_report(
    runs: int,
    checkpoints: int,
    noise_scale: float,
    *,
    trials: int = 100_000,
    seed: int = 0,
    true_losses: np.ndarray | None = None,
) -> dict:
    result = simulate_optimism(
        OptimismSimConfig(
            runs=runs,
            checkpoints=checkpoints,
            noise_scale=noise_scale,
            trials=trials,
            seed=seed,
            true_losses=true_losses,
        )
    )
    return {
        "runs": runs,
        "checkpoints": checkpoints,
        "candidates": runs * checkpoints,
        "noise_scale": noise_scale,
        "trials": trials,
        "seed": seed,
        "expected_min_observed": result.expected_min_observed,
        "best_true_loss": result.best_true_loss,
        "optimism": result.optimism,
        "std_error": result.std_error,
    }


def inspect_pool_text(path: str | Path) -> str:
    """Human-readable table of a pool checkpoint's members."""
    records = load_checkpoint(path)
    lines = [f"models: {len(records)}"]
    if records:
        lines.append(f"architecture: {records[0].params.architecture_signature}")
    lines.append("id\tgeneration\tlineage\twidth\tepochs\tdropout\tnoise\tparams")
    for r in records:
        lineage = r.lineage.kind
        if r.lineage.kind == "genetic":
            lineage = f"genetic({r.lineage.parent_a},{r.lineage.parent_b})"
        lines.append(
            "\t".join(
                [
                    r.model_id,
                    str(r.generation),
                    lineage,
                    str(r.config.hidden_width),
                    str(r.config.epochs),
                    f"{r.config.dropout_rate:g}",
                    f"{r.config.augmentation_noise:g}",
                    str(r.params.total_size),
                ]
            )
        )
    return "\n".join(lines) + "\n"
