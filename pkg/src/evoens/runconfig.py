"""Run configuration: one INI file with named sections, validated up front.

Every option is parsed and validated before any work starts or any output
file is touched; an invalid config therefore can never leave a half-written
run directory behind.  Unknown sections or keys are errors (they are almost
always typos).  See the README for the full grammar; ``example_config`` below
is the canonical template.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .evolution import EvolutionConfig, LearnerConfigSpace
from .prototypes import EnsembleConfig
from .splitting import SplitConfig

__all__ = ["RunConfig", "load_run_config", "example_config"]

METHODS = ("single", "inc-ens", "evo-ens")

_SCHEMA: dict[str, set[str]] = {
    "data": {"dataset", "embeddings"},
    "split": {
        "mode",
        "train_ratio",
        "max_iterations",
        "epsilon_conv",
        "zeta",
        "encoder",
        "encoder_outputs",
        "seed",
    },
    "validation": {"fraction"},
    "pool": {
        "size",
        "generations",
        "offspring_per_generation",
        "fresh_per_generation",
        "alpha",
        "mutation_rate",
        "mutation_std",
        "fine_tune_epochs",
    },
    "learners": {
        "hidden_widths",
        "dropout_rates",
        "augmentation_noises",
        "epochs_choices",
        "learning_rate",
        "batch_size",
        "activation",
    },
    "ensemble": {
        "experts_per_cluster",
        "k_min",
        "k_max",
        "perturbation_noise",
        "perturbation_seeds",
        "fine_tune_epochs",
    },
    "baselines": {"single_models", "single_checkpoints", "inc_ens_k"},
    "run": {"methods", "seeds", "output_dir"},
}


@dataclass(frozen=True)
class RunConfig:
    dataset_path: Path
    embeddings_path: Path | None
    split_mode: str  # "guided" | "random"
    split: SplitConfig
    encoder: str  # "pretext-mlp" | "file"
    encoder_outputs: int
    validation_fraction: float
    evolution: EvolutionConfig  # note: per-run seeds are derived later
    space: LearnerConfigSpace
    ensemble: EnsembleConfig
    single_models: int
    single_checkpoints: int
    inc_ens_k: int
    methods: tuple[str, ...]
    seeds: tuple[int, ...]
    output_dir: Path
    source_text: str = field(repr=False, default="")


def _floats(raw: str) -> tuple[float, ...]:
    return tuple(float(v.strip()) for v in raw.split(",") if v.strip())


def _ints(raw: str) -> tuple[int, ...]:
    return tuple(int(v.strip()) for v in raw.split(",") if v.strip())


def load_run_config(
    path: str | Path,
    *,
    output_dir: str | Path | None = None,
    seed_override: tuple[int, ...] | None = None,
) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        source_text = path.read_text(encoding="utf-8")
        parser.read_string(source_text, source=str(path))
    except (configparser.Error, UnicodeDecodeError) as exc:
        raise ConfigError(f"{path}: cannot parse config ({exc})") from exc

    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"{path}: unknown section [{section}]")
        unknown = set(parser[section]) - _SCHEMA[section]
        if unknown:
            raise ConfigError(
                f"{path}: unknown keys in [{section}]: {', '.join(sorted(unknown))}"
            )

    def get(section: str, key: str, default: str | None = None) -> str:
        value = parser.get(section, key, fallback=default)
        if value is None:
            raise ConfigError(f"{path}: missing required option [{section}] {key}")
        return value

    try:
        dataset_path = Path(get("data", "dataset"))
        embeddings_raw = parser.get("data", "embeddings", fallback=None)
        embeddings_path = Path(embeddings_raw) if embeddings_raw else None

        split_mode = get("split", "mode", "guided").strip().lower()
        if split_mode not in ("guided", "random"):
            raise ConfigError(f"split mode must be 'guided' or 'random', got {split_mode!r}")
        split = SplitConfig(
            train_ratio=float(get("split", "train_ratio", "0.3")),
            max_iterations=int(get("split", "max_iterations", "10")),
            epsilon_conv=float(get("split", "epsilon_conv", "1e-4")),
            zeta=float(get("split", "zeta", "0.0")),
            seed=int(get("split", "seed", "0")),
        )
        encoder = get("split", "encoder", "pretext-mlp").strip().lower()
        if encoder not in ("pretext-mlp", "file"):
            raise ConfigError(f"encoder must be 'pretext-mlp' or 'file', got {encoder!r}")
        if split_mode == "guided" and encoder == "file" and embeddings_path is None:
            raise ConfigError("encoder = file requires [data] embeddings")
        encoder_outputs = int(get("split", "encoder_outputs", "4"))
        if encoder_outputs < 2:
            raise ConfigError("encoder_outputs must be >= 2")

        validation_fraction = float(get("validation", "fraction", "0.3"))
        if not 0.0 < validation_fraction < 1.0:
            raise ConfigError("validation fraction must be in (0, 1)")

        evolution = EvolutionConfig(
            pool_size=int(get("pool", "size", "20")),
            generations=int(get("pool", "generations", "4")),
            offspring_per_generation=int(get("pool", "offspring_per_generation", "8")),
            fresh_per_generation=int(get("pool", "fresh_per_generation", "3")),
            alpha=float(get("pool", "alpha", "0.5")),
            mutation_rate=float(get("pool", "mutation_rate", "0.05")),
            mutation_std=float(get("pool", "mutation_std", "0.01")),
            fine_tune_epochs=int(get("pool", "fine_tune_epochs", "1")),
        )
        space = LearnerConfigSpace(
            hidden_widths=_ints(get("learners", "hidden_widths", "16,32,64")),
            dropout_rates=_floats(get("learners", "dropout_rates", "0.0,0.1,0.2")),
            augmentation_noises=_floats(
                get("learners", "augmentation_noises", "0.0,0.01,0.05")
            ),
            epochs_choices=_ints(get("learners", "epochs_choices", "1,2,3")),
            learning_rate=float(get("learners", "learning_rate", "0.01")),
            batch_size=int(get("learners", "batch_size", "32")),
            activation=get("learners", "activation", "relu").strip().lower(),
        )
        k_min = int(get("ensemble", "k_min", "2"))
        k_max = int(get("ensemble", "k_max", "5"))
        if not 2 <= k_min <= k_max:
            raise ConfigError(f"ensemble k range [{k_min}, {k_max}] is invalid")
        ensemble = EnsembleConfig(
            experts_per_cluster=int(get("ensemble", "experts_per_cluster", "5")),
            k_range=(k_min, k_max),
            perturbation_noise=float(get("ensemble", "perturbation_noise", "0.05")),
            perturbation_seeds=int(get("ensemble", "perturbation_seeds", "3")),
            fine_tune_epochs=int(get("ensemble", "fine_tune_epochs", "1")),
        )
        single_models = int(get("baselines", "single_models", "20"))
        single_checkpoints = int(get("baselines", "single_checkpoints", "3"))
        inc_ens_k = int(get("baselines", "inc_ens_k", "3"))
        if single_models < 1 or single_checkpoints < 1 or inc_ens_k < 1:
            raise ConfigError("baseline counts must be >= 1")

        methods = tuple(
            m.strip() for m in get("run", "methods", "single,inc-ens,evo-ens").split(",") if m.strip()
        )
        if not methods:
            raise ConfigError("at least one method is required")
        for m in methods:
            if m not in METHODS:
                raise ConfigError(f"unknown method {m!r}; choose from {METHODS}")
        if len(set(methods)) != len(methods):
            raise ConfigError("duplicate methods listed")
        seeds = _ints(get("run", "seeds", "0"))
        if seed_override is not None:
            seeds = tuple(int(s) for s in seed_override)
        if not seeds:
            raise ConfigError("at least one seed is required")
        if len(set(seeds)) != len(seeds):
            raise ConfigError("duplicate seeds listed")
        out_dir = Path(output_dir) if output_dir is not None else Path(get("run", "output_dir", "out"))
    except ValueError as exc:
        raise ConfigError(f"{path}: invalid option value ({exc})") from exc

    return RunConfig(
        dataset_path=dataset_path,
        embeddings_path=embeddings_path,
        split_mode=split_mode,
        split=split,
        encoder=encoder,
        encoder_outputs=encoder_outputs,
        validation_fraction=validation_fraction,
        evolution=evolution,
        space=space,
        ensemble=ensemble,
        single_models=single_models,
        single_checkpoints=single_checkpoints,
        inc_ens_k=inc_ens_k,
        methods=methods,
        seeds=seeds,
        output_dir=out_dir,
        source_text=source_text,
    )


def example_config(dataset: str = "data.csv", output_dir: str = "out") -> str:
    """A complete config template with every option at its default."""
    return f"""[data]
dataset = {dataset}
# embeddings = embeddings.csv   # required when encoder = file

[split]
mode = guided          # guided | random
train_ratio = 0.3
max_iterations = 10
epsilon_conv = 1e-4
zeta = 0.0
encoder = pretext-mlp  # pretext-mlp | file
encoder_outputs = 4
seed = 0

[validation]
fraction = 0.3         # stratified share of the train side

[pool]
size = 20
generations = 4
offspring_per_generation = 8
fresh_per_generation = 3
alpha = 0.5
mutation_rate = 0.05
mutation_std = 0.01
fine_tune_epochs = 1

[learners]
hidden_widths = 16,32,64
dropout_rates = 0.0,0.1,0.2
augmentation_noises = 0.0,0.01,0.05
epochs_choices = 1,2,3
learning_rate = 0.01
batch_size = 32
activation = relu

[ensemble]
experts_per_cluster = 5
k_min = 2
k_max = 5
perturbation_noise = 0.05
perturbation_seeds = 3
fine_tune_epochs = 1

[baselines]
single_models = 20
single_checkpoints = 3
inc_ens_k = 3

[run]
methods = single,inc-ens,evo-ens
seeds = 0,1,2
output_dir = {output_dir}
"""
