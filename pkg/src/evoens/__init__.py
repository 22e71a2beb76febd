"""evoens: validation-free evolutionary model pools, prototype ensembles,
and overfitting-aware evaluation utilities.

The package splits into:

* model substrate — ``mlp`` (reference MLP learner), ``params`` (named
  role-tagged tensors), ``checkpoints`` (bitwise pool persistence);
* numerics — ``divergences``, ``gmm``, ``pca``, ``simplex``;
* pool construction — ``evolution`` (crossover + generational loop, zero
  validation access) and ``prototypes`` (clustering, election, fusion,
  weighted ensembling);
* evaluation — ``splitting`` (divergence-guided train/test splits),
  ``metrics`` (G-mean and overfitting gaps), ``optimism`` (selection-bias
  simulation, label-shift bound), ``baselines`` (validation-hungry
  references), ``trace`` (data-access auditing);
* orchestration — ``runconfig``, ``runner``, ``cli``.
"""

from .baselines import IncEnsResult, SingleBaselineResult, baseline_inc_ens, baseline_single
from .checkpoints import atomic_write_text, load_checkpoint, save_checkpoint
from .cli import main
from .datasets import (
    Dataset,
    load_dataset_csv,
    load_embeddings_csv,
    make_blobs,
    make_two_mode_benchmark,
    perturb_inputs,
    save_dataset_csv,
    save_embeddings_csv,
    stratified_split_indices,
)
from .divergences import EPSILON, js_divergence, js_rows, js_to_reference, kl_divergence
from .errors import CheckpointError, ConfigError, EvoensError, SplitError
from .evolution import (
    EvolutionConfig,
    LearnerConfigSpace,
    ModelPool,
    crossover_mutate,
    evolve_pool,
)
from .gmm import GmmModel, gmm_assign, gmm_fit, mean_silhouette, select_k_by_silhouette
from .metrics import (
    balanced_gm_score,
    geometric_mean_score,
    predictor_labels,
    predictor_probabilities,
    to_gap,
    vo_gap,
)
from .mlp import (
    Activation,
    LearnerConfig,
    Lineage,
    ModelRecord,
    fine_tune_head,
    init_params,
    loss_and_gradients,
    predict_labels,
    predict_proba,
    train,
)
from .optimism import (
    ClassPriors,
    OptimismResult,
    OptimismSimConfig,
    label_shift_bound_check,
    simulate_optimism,
)
from .params import NamedParamSet, NamedTensor, TensorGroup, TensorRole
from .pca import PcaReducer, fit_pca, reduce_dim
from .prototypes import (
    ClusterReport,
    EnsembleConfig,
    EnsemblePredictor,
    PerturbationSpec,
    PredictionSignature,
    build_ensemble,
    cluster_models,
    elect_experts,
    extract_signatures,
    fuse_prototype,
    load_ensemble,
    predict_ensemble,
    save_ensemble,
)
from .simplex import (
    SimplexWeights,
    blended_cross_entropy,
    optimize_simplex_weights,
    project_to_simplex,
)
from .runconfig import RunConfig, example_config, load_run_config
from .runner import (
    cmd_report,
    cmd_run,
    cmd_split,
    inspect_pool_text,
    simulate_optimism_report,
)
from .splitting import SplitConfig, SplitIndices, jsd_guided_split, pretext_softmax_embeddings
from .trace import RunTrace, TraceEvent, count_validation_queries

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
