"""End-to-end acceptance gate.

Each test covers one numbered criterion, checks its substance at the stated
tolerance, enforces its runtime budget, and emits exactly one
``criterion N: PASS/FAIL`` line (visible with ``pytest -s`` and in failure
reports).
"""

from __future__ import annotations

import dataclasses
import math
import shutil
import time
from pathlib import Path

import numpy as np
import pytest
from sklearn.metrics import adjusted_rand_score

from evoens import (
    EnsembleConfig,
    EvolutionConfig,
    LearnerConfig,
    LearnerConfigSpace,
    NamedParamSet,
    NamedTensor,
    RunTrace,
    SplitConfig,
    TensorGroup,
    TensorRole,
    baseline_inc_ens,
    baseline_single,
    blended_cross_entropy,
    build_ensemble,
    cluster_models,
    cmd_run,
    crossover_mutate,
    evolve_pool,
    extract_signatures,
    fuse_prototype,
    geometric_mean_score,
    gmm_assign,
    gmm_fit,
    init_params,
    js_divergence,
    jsd_guided_split,
    load_run_config,
    loss_and_gradients,
    make_blobs,
    make_two_mode_benchmark,
    optimize_simplex_weights,
    predict_ensemble,
    predict_proba,
    save_dataset_csv,
    simulate_optimism,
    stratified_split_indices,
    train,
    vo_gap,
)
from evoens.mlp import Activation
from evoens.optimism import OptimismSimConfig
from evoens.seeding import derive_seed


def _check(num: int, budget_seconds: float, body) -> None:
    """Run one criterion body, print its single PASS/FAIL line, enforce the
    runtime budget."""
    start = time.perf_counter()
    try:
        detail = body()
        elapsed = time.perf_counter() - start
        if elapsed >= budget_seconds:
            raise AssertionError(
                f"runtime {elapsed:.1f}s exceeds the {budget_seconds:.0f}s budget"
            )
    except BaseException as exc:  # one FAIL line, then let pytest report it
        print(f"criterion {num}: FAIL - {exc}")
        raise
    print(f"criterion {num}: PASS ({elapsed:.1f}s) - {detail}")


@pytest.fixture(scope="module")
def benchmark():
    """The 2000-sample shifted benchmark: dataset, embeddings, mode ids."""
    return make_two_mode_benchmark(2000, seed=0)


def _random_split_jsd(embeddings, labels, ratio, seed):
    rng = np.random.default_rng(seed)
    mask = np.zeros(labels.size, dtype=bool)
    for c in np.unique(labels):
        idx = np.nonzero(labels == c)[0]
        k = int(np.floor(ratio * idx.size + 0.5))
        mask[rng.choice(idx, size=k, replace=False)] = True
    return js_divergence(
        embeddings[mask].mean(axis=0), embeddings[~mask].mean(axis=0)
    )


def test_criterion_01_splitter_divergence(benchmark):
    def body():
        dataset, embeddings, _ = benchmark
        result = jsd_guided_split(
            embeddings, dataset.labels, SplitConfig(train_ratio=0.3, seed=0)
        )
        random_mean = float(
            np.mean(
                [
                    _random_split_jsd(embeddings, dataset.labels, 0.3, 900 + i)
                    for i in range(20)
                ]
            )
        )
        ratio = result.global_jsd / random_mean
        assert result.global_jsd >= 10.0 * random_mean, (
            f"guided {result.global_jsd:.4f} < 10x random mean {random_mean:.4f}"
        )
        for c in np.unique(dataset.labels):
            n_c = int(np.sum(dataset.labels == c))
            want = int(np.floor(0.3 * n_c + 0.5))
            got = int(np.sum(dataset.labels[result.train_ids] == c))
            assert got == want, f"class {c}: train size {got} != {want}"
        assert all(n <= 3 for n in result.per_class_iterations.values()), (
            f"iterations {result.per_class_iterations}"
        )
        return (
            f"guided JSD {result.global_jsd:.4f} = {ratio:.0f}x random mean, "
            f"iterations {dict(result.per_class_iterations)}, ratios exact"
        )

    _check(1, 10.0, body)


def test_criterion_02_zeta_decay(benchmark):
    def body():
        dataset, embeddings, _ = benchmark
        zetas = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5)
        means = []
        for zeta in zetas:
            vals = [
                jsd_guided_split(
                    embeddings,
                    dataset.labels,
                    SplitConfig(train_ratio=0.3, zeta=zeta, seed=s),
                ).global_jsd
                for s in range(20)
            ]
            means.append(float(np.mean(vals)))
        assert means[0] > 0.0, "JSD must be strictly positive at zeta=0"
        for z, lo, hi in zip(zetas[1:], means[1:], means[:-1]):
            assert lo <= hi + 1e-12, f"mean JSD rose at zeta={z}: {lo} > {hi}"
        return "mean JSD over 20 seeds: " + " -> ".join(f"{m:.3f}" for m in means)

    _check(2, 60.0, body)


def _expected_max_std_normal(n: int) -> float:
    """Independent oracle: E[max of n standard normals] by trapezoid
    integration of x * n * phi(x) * Phi(x)^(n-1)."""
    x = np.linspace(-12.0, 12.0, 200_001)
    phi = np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi)
    Phi = 0.5 * (1.0 + np.array([math.erf(v / math.sqrt(2.0)) for v in x]))
    return float(np.trapezoid(x * n * phi * Phi ** (n - 1), x))


def test_criterion_03_optimism_scaling():
    def body():
        shapes = {10: (5, 2), 100: (10, 10), 1000: (100, 10)}
        results = {}
        details = []
        for nq, (n, q) in shapes.items():
            result = simulate_optimism(
                OptimismSimConfig(
                    runs=n, checkpoints=q, noise_scale=1.0, trials=100_000, seed=0
                )
            )
            oracle = _expected_max_std_normal(nq)
            rel = abs(result.optimism - oracle) / oracle
            assert rel <= 0.15, f"Nq={nq}: {result.optimism:.4f} vs oracle {oracle:.4f}"
            results[nq] = result
            details.append(f"Nq={nq}: {result.optimism:.3f}~{oracle:.3f}")
        ordered = [results[nq] for nq in (10, 100, 1000)]
        for smaller, larger in zip(ordered, ordered[1:]):
            assert larger.optimism > smaller.optimism, "optimism must grow with Nq"
        return ", ".join(details) + " (within 15%, strictly increasing)"

    _check(3, 30.0, body)


def _all_role_params(rng: np.random.Generator) -> NamedParamSet:
    return NamedParamSet(
        tensors=(
            NamedTensor("enc.weight", (4, 3), rng.normal(size=(4, 3)), TensorRole.WEIGHT, TensorGroup.BODY),
            NamedTensor("enc.bias", (3,), rng.normal(size=(3,)), TensorRole.BIAS, TensorGroup.BODY),
            NamedTensor("norm.running_mean", (3,), rng.normal(size=(3,)), TensorRole.NORM_STAT, TensorGroup.BODY),
            NamedTensor("norm.count", (1,), rng.normal(size=(1,)), TensorRole.BUFFER, TensorGroup.BODY),
            NamedTensor("out.weight", (3, 2), rng.normal(size=(3, 2)), TensorRole.WEIGHT, TensorGroup.HEAD),
            NamedTensor("out.bias", (2,), rng.normal(size=(2,)), TensorRole.BIAS, TensorGroup.HEAD),
        )
    )


def test_criterion_04_genetic_identity():
    def body():
        rng = np.random.default_rng(0)
        a = _all_role_params(rng)
        child = crossover_mutate(a, a, 0.5, 0.0, 0.01, seed=1)
        assert child.equal_bits(a), "crossover of identical parents must be identity"
        fused = fuse_prototype([a, a, a, a, a])
        assert fused.equal_bits(a), "fusing copies must be identity"
        b = _all_role_params(rng)
        blend = crossover_mutate(a, b, 0.5, 0.0, 0.01, seed=2)
        mutated = crossover_mutate(a, b, 0.5, 1.0, 0.01, seed=2)
        for t_blend, t_mut in zip(blend.tensors, mutated.tensors):
            if t_mut.role in (TensorRole.NORM_STAT, TensorRole.BUFFER):
                np.testing.assert_array_equal(
                    t_mut.values, t_blend.values,
                    err_msg=f"{t_mut.name} must never be mutated",
                )
            else:
                assert not np.array_equal(t_mut.values, t_blend.values)
        return "identity crossover/fusion bitwise; buffers and norm stats unmutated"

    _check(4, 1.0, body)


def test_criterion_05_validation_query_audit(blob_data, tiny_space):
    def body():
        pool_trace = RunTrace()
        pool = evolve_pool(
            EvolutionConfig(
                pool_size=15,
                generations=3,
                offspring_per_generation=6,
                fresh_per_generation=3,
                seed=0,
            ),
            blob_data,
            tiny_space,
            trace=pool_trace,
        )
        touched = [
            e
            for e in pool_trace.events
            if e.kind in ("validation-query", "validation-read")
        ]
        assert touched == [], f"pool generation touched validation: {touched}"
        assert len(pool.records) == 15

        single_trace = RunTrace()
        baseline_single(5, 3, blob_data, blob_data, tiny_space, seed=0, trace=single_trace)
        queries = [
            e for e in single_trace.events if e.kind == "validation-query"
        ]
        assert len(queries) == 15, f"single(5,3) logged {len(queries)} queries"

        inc_trace = RunTrace()
        baseline_inc_ens(pool.records, 3, blob_data, trace=inc_trace)
        inc_queries = [
            e for e in inc_trace.events if e.kind == "validation-query"
        ]
        per_step = {
            step: sum(1 for e in inc_queries if e.detail["step"] == step)
            for step in range(3)
        }
        assert per_step == {0: 15, 1: 14, 2: 13}, f"per-step counts {per_step}"
        return (
            "pool: 0 validation accesses; single(5,3): 15 queries; "
            "inc-ens steps 15/14/13"
        )

    _check(5, 300.0, body)


def test_criterion_06_clustering_recovery(blob_data, quick_config, three_blob_points):
    def body():
        sharp = train(
            LearnerConfig(hidden_width=8, learning_rate=1e-2, epochs=8, seed=0),
            blob_data,
        )
        dull = train(
            LearnerConfig(hidden_width=8, learning_rate=1e-4, epochs=1, seed=1),
            blob_data,
        )
        pool = [
            dataclasses.replace(m, model_id=f"{side}{i:02d}")
            for side, m in (("a", sharp), ("b", dull))
            for i in range(10)
        ]
        signatures = extract_signatures(pool, blob_data)
        report = cluster_models(signatures, seed=0)
        truth = [0] * 10 + [1] * 10
        found = [report.assignments[s.model_id] for s in signatures]
        ari = adjusted_rand_score(truth, found)
        assert report.k == 2, f"expected K=2, got {report.k}"
        assert ari == 1.0, f"copy-identity ARI {ari}"

        points, labels = three_blob_points
        model = gmm_fit(points, 3, seed=0)
        blob_ari = adjusted_rand_score(labels, gmm_assign(model, points))
        assert blob_ari >= 0.95, f"3-blob ARI {blob_ari}"
        return f"copies: K=2, ARI 1.0; 3-blob GMM ARI {blob_ari:.3f}"

    _check(6, 30.0, body)


def test_criterion_07_simplex_optimizer():
    def body():
        rng = np.random.default_rng(4)
        n = 200
        labels = np.array([0, 1] * (n // 2))
        eye = np.eye(2)
        correct = np.clip(eye[labels] * 0.94 + 0.03, 0.0, 1.0)
        wrong = np.clip(eye[1 - labels] * 0.94 + 0.03, 0.0, 1.0)
        flat = np.full((n, 2), 0.5)
        preds = np.stack([correct, wrong, flat])

        weights = optimize_simplex_weights(preds, labels)
        values = weights.values
        assert np.all(values >= -1e-8), f"negative weight {values.min()}"
        assert abs(values.sum() - 1.0) <= 1e-8, f"sum {values.sum()}"
        assert values[0] >= 0.9, f"dominant weight {values[0]:.4f}"

        mine = blended_cross_entropy(values, preds, labels)
        true_probs = preds[:, np.arange(n), labels]  # (3, n)
        best_grid = np.inf
        grid = np.arange(1001) / 1000.0
        for w1 in grid:
            w2 = np.arange(int(round((1.0 - w1) * 1000)) + 1) / 1000.0
            w = np.column_stack([np.full(w2.size, w1), w2, 1.0 - w1 - w2])
            blended = np.maximum(w @ true_probs, 1e-12)
            best_grid = min(best_grid, float((-np.log(blended).mean(axis=1)).min()))
        assert mine <= best_grid + 1e-6, f"mine {mine:.8f} vs grid {best_grid:.8f}"
        return (
            f"constraints within 1e-8, dominant weight {values[0]:.3f}, "
            f"objective {mine:.6f} <= grid oracle {best_grid:.6f} + 1e-6"
        )

    _check(7, 10.0, body)


def test_criterion_08_end_to_end_vo_reduction(benchmark):
    def body():
        dataset, embeddings, _ = benchmark
        space = LearnerConfigSpace()
        guided = jsd_guided_split(
            embeddings, dataset.labels, SplitConfig(train_ratio=0.3, seed=0)
        )

        def run_arms(train_ids, test_ids):
            train_set = dataset.subset(train_ids)
            test_set = dataset.subset(test_ids)
            rows = []
            for s in range(10):
                val_rel, fit_rel = stratified_split_indices(
                    train_set.labels, 0.3, derive_seed(s, "val-split")
                )
                fit = train_set.subset(fit_rel)
                val = train_set.subset(val_rel)
                sweep = baseline_single(
                    20, 3, fit, val, space, seed=derive_seed(s, "single")
                )
                single_record = sweep.record
                pool = evolve_pool(
                    EvolutionConfig(seed=derive_seed(s, "pool-gen")), fit, space
                )
                ensemble, _ = build_ensemble(
                    pool.records,
                    fit,
                    val,
                    5,
                    EnsembleConfig(k_range=(2, 3), seed=derive_seed(s, "ensemble")),
                )
                inc = baseline_inc_ens(sweep.per_model_best(), 3, val)
                rows.append(
                    {
                        "single_vo": vo_gap(single_record, val, test_set),
                        "evo_vo": vo_gap(ensemble, val, test_set),
                        "single_test": geometric_mean_score(
                            predict_proba(single_record, test_set.features).argmax(1),
                            test_set.labels,
                        ),
                        "evo_test": geometric_mean_score(
                            predict_ensemble(ensemble, test_set.features).argmax(1),
                            test_set.labels,
                        ),
                        "inc_test": geometric_mean_score(
                            predict_ensemble(
                                inc.ensemble, test_set.features
                            ).argmax(1),
                            test_set.labels,
                        ),
                    }
                )
            return rows

        guided_rows = run_arms(guided.train_ids, guided.test_ids)
        wins = sum(1 for r in guided_rows if r["evo_vo"] < r["single_vo"])
        assert wins >= 8, f"VO strictly smaller in only {wins}/10 seeds"
        med_single = float(np.median([r["single_test"] for r in guided_rows]))
        med_evo = float(np.median([r["evo_test"] for r in guided_rows]))
        assert med_evo >= med_single - 0.02, (
            f"median test GM: evo {med_evo:.4f} vs single {med_single:.4f}"
        )

        random_train, random_test = stratified_split_indices(
            dataset.labels, 0.3, derive_seed(0, "random-split")
        )
        random_rows = run_arms(random_train, random_test)
        med_evo_rs = float(np.median([r["evo_test"] for r in random_rows]))
        med_inc_rs = float(np.median([r["inc_test"] for r in random_rows]))
        assert abs(med_evo_rs - med_inc_rs) <= 0.05, (
            f"random split: evo {med_evo_rs:.4f} vs inc-ens {med_inc_rs:.4f}"
        )
        return (
            f"guided: VO wins {wins}/10 "
            f"(med VO single {np.median([r['single_vo'] for r in guided_rows]):.1f} "
            f"vs evo {np.median([r['evo_vo'] for r in guided_rows]):.1f}), "
            f"med test GM single {med_single:.3f} vs evo {med_evo:.3f}; "
            f"random: evo {med_evo_rs:.3f} within 0.05 of inc-ens {med_inc_rs:.3f}"
        )

    _check(8, 1800.0, body)


def test_criterion_09_gradient_check(blob_data):
    def body():
        step = 1e-5
        worst = 0.0
        for activation in (Activation.RELU, Activation.TANH):
            config = LearnerConfig(
                hidden_width=8, activation=activation, learning_rate=1e-2, seed=5
            )
            params = init_params(config, blob_data.feature_dim, blob_data.class_count)
            batch = blob_data.subset(np.array([0, 27, 61]))
            _, grads = loss_and_gradients(
                params, batch.features, batch.labels, activation
            )
            for tensor in params.tensors:
                grad = grads[tensor.name]
                flat = tensor.values.ravel()
                for j in range(flat.size):
                    for sign, store in ((+1, "hi"), (-1, "lo")):
                        shifted = tensor.values.copy()
                        shifted.ravel()[j] += sign * step
                        loss, _ = loss_and_gradients(
                            params.with_tensors({tensor.name: shifted}),
                            batch.features,
                            batch.labels,
                            activation,
                        )
                        if store == "hi":
                            hi = loss
                        else:
                            lo = loss
                    numeric = (hi - lo) / (2 * step)
                    analytic = grad.ravel()[j]
                    rel = abs(analytic - numeric) / max(
                        abs(analytic) + abs(numeric), 1e-8
                    )
                    worst = max(worst, rel)
        assert worst <= 1e-4, f"worst relative error {worst:.2e}"
        return f"worst relative gradient error {worst:.2e} over both activations"

    _check(9, 1.0, body)


def _snapshot(root: Path) -> dict[str, bytes]:
    return {
        str(p.relative_to(root)): p.read_bytes()
        for p in sorted(root.rglob("*"))
        if p.is_file() and p.name != "timings.tsv"
    }


def test_criterion_10_determinism_and_resume(tmp_path):
    def body():
        data_path = tmp_path / "data.csv"
        save_dataset_csv(
            make_blobs(30, np.array([[-2.0, 0.0], [2.0, 0.0]]), std=0.8, seed=3),
            data_path,
        )
        config_text = f"""[data]
dataset = {data_path}

[split]
mode = guided
train_ratio = 0.5
seed = 0

[validation]
fraction = 0.3

[pool]
size = 4
generations = 2
offspring_per_generation = 4
fresh_per_generation = 2

[learners]
hidden_widths = 8
dropout_rates = 0.0
augmentation_noises = 0.0
epochs_choices = 1
batch_size = 16

[ensemble]
experts_per_cluster = 3
k_min = 2
k_max = 2

[baselines]
single_models = 3
single_checkpoints = 2
inc_ens_k = 2

[run]
methods = single,inc-ens,evo-ens
seeds = 0,1
output_dir = unused
"""
        config_path = tmp_path / "run.ini"
        config_path.write_text(config_text)

        def run_into(name: str, stage_hook=None) -> Path:
            out = tmp_path / name
            config = load_run_config(config_path, output_dir=out)
            cmd_run(config, stage_hook=stage_hook)
            return out

        first = _snapshot(run_into("first"))
        second = _snapshot(run_into("second"))
        assert first.keys() == second.keys(), (
            f"file sets differ: {first.keys() ^ second.keys()}"
        )
        mismatched = [k for k in first if first[k] != second[k]]
        assert not mismatched, f"bytes differ: {mismatched}"

        calls = {"n": 0}

        def killer(label: str) -> None:
            calls["n"] += 1
            if calls["n"] == 5:  # partway through the first seed's methods
                raise KeyboardInterrupt

        with pytest.raises(KeyboardInterrupt):
            run_into("resumed", stage_hook=killer)
        partial = _snapshot(tmp_path / "resumed")
        assert 0 < len(partial) < len(first), "kill must leave a partial directory"
        resumed = _snapshot(run_into("resumed"))
        assert resumed == first, "kill-and-resume output differs from a clean run"
        return (
            f"two clean runs byte-identical ({len(first)} files, timings.tsv "
            f"excluded); resume after kill at stage 5 matches exactly"
        )

    _check(10, 1800.0, body)
