"""Selection-optimism simulation and a label-shift transfer bound.

``simulate_optimism`` quantifies how optimistic "pick the checkpoint with the
best validation loss" is: observed losses are modelled as true loss plus
zero-mean Gaussian measurement noise, ``L[i,t] = nu[i,t] + noise``, over
``runs x checkpoints`` candidates.  Selection takes the minimum observed
loss; optimism is the best *true* loss minus the expected selected minimum.
With flat true losses this is E[max of N*q standard normals] scaled by the
noise, so it grows like sqrt(2 log(N*q)) — more checkpoints, more optimism,
independent of any real quality difference.

``label_shift_bound_check`` evaluates the elementary transfer bound
``|R_e - R_v| <= 2 M TV(pi_v, pi_e)`` for per-class losses bounded by M under
a change of class priors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .seeding import derive_rng

__all__ = [
    "OptimismSimConfig",
    "OptimismResult",
    "simulate_optimism",
    "ClassPriors",
    "label_shift_bound_check",
]


@dataclass(frozen=True)
class OptimismSimConfig:
    runs: int  # N: independent training runs
    checkpoints: int  # q: validation queries per run
    noise_scale: float  # measurement-noise std
    trials: int = 100_000
    seed: int = 0
    true_losses: np.ndarray | None = None  # (N, q); defaults to all zeros

    def __post_init__(self) -> None:
        if self.runs < 1 or self.checkpoints < 1:
            raise ConfigError("runs and checkpoints must be >= 1")
        if self.noise_scale < 0:
            raise ConfigError("noise_scale must be >= 0")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.true_losses is not None:
            tl = np.asarray(self.true_losses, dtype=np.float64)
            if tl.shape != (self.runs, self.checkpoints):
                raise ConfigError(
                    f"true_losses must have shape ({self.runs}, {self.checkpoints})"
                )
            object.__setattr__(self, "true_losses", tl)


@dataclass(frozen=True)
class OptimismResult:
    expected_min_observed: float  # E[min over candidates of observed loss]
    best_true_loss: float  # nu_star = min over candidates of true loss
    optimism: float  # nu_star - E[min observed]; >= 0 in expectation
    std_error: float  # Monte-Carlo standard error of expected_min_observed
    trials: int


def simulate_optimism(config: OptimismSimConfig) -> OptimismResult:
    """Monte-Carlo estimate of selection optimism, chunked to bound memory."""
    nu = (
        config.true_losses
        if config.true_losses is not None
        else np.zeros((config.runs, config.checkpoints))
    )
    flat_nu = nu.ravel()
    nu_star = float(flat_nu.min())
    rng = derive_rng(config.seed, "optimism")

    total = 0.0
    total_sq = 0.0
    remaining = config.trials
    chunk = max(1, min(remaining, 4_000_000 // max(flat_nu.size, 1)))
    while remaining > 0:
        b = min(chunk, remaining)
        noise = rng.normal(0.0, config.noise_scale, size=(b, flat_nu.size))
        mins = (flat_nu[None, :] + noise).min(axis=1)
        total += float(mins.sum())
        total_sq += float((mins * mins).sum())
        remaining -= b

    mean_min = total / config.trials
    var = max(total_sq / config.trials - mean_min**2, 0.0)
    std_error = float(np.sqrt(var / config.trials))
    return OptimismResult(
        expected_min_observed=mean_min,
        best_true_loss=nu_star,
        optimism=nu_star - mean_min,
        std_error=std_error,
        trials=config.trials,
    )


@dataclass(frozen=True)
class ClassPriors:
    probabilities: np.ndarray

    def __post_init__(self) -> None:
        p = np.asarray(self.probabilities, dtype=np.float64)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("priors must be a non-empty 1-D array")
        if np.any(p < 0) or abs(float(p.sum()) - 1.0) > 1e-9:
            raise ValueError("priors must lie on the probability simplex")
        object.__setattr__(self, "probabilities", p)


def label_shift_bound_check(
    per_class_losses: np.ndarray,
    priors_v: ClassPriors | np.ndarray,
    priors_e: ClassPriors | np.ndarray,
    loss_bound: float,
) -> tuple[float, float]:
    """Return ``(gap, bound)`` where ``gap = |sum_i (pi_e[i] - pi_v[i]) l_i|``
    and ``bound = 2 * loss_bound * total_variation(pi_v, pi_e)``.

    ``gap <= bound`` holds for any losses within ``[0, loss_bound]``; callers
    use it to sanity-check how much prior shift alone can move a risk
    estimate between two evaluation sets.
    """
    pv = priors_v if isinstance(priors_v, ClassPriors) else ClassPriors(priors_v)
    pe = priors_e if isinstance(priors_e, ClassPriors) else ClassPriors(priors_e)
    losses = np.asarray(per_class_losses, dtype=np.float64)
    if losses.shape != pv.probabilities.shape or losses.shape != pe.probabilities.shape:
        raise ValueError("per_class_losses and priors must share one shape")
    if loss_bound <= 0:
        raise ValueError("loss_bound must be > 0")
    if np.any(losses < 0) or np.any(losses > loss_bound):
        raise ValueError("per-class losses must lie within [0, loss_bound]")
    gap = float(abs(np.sum((pe.probabilities - pv.probabilities) * losses)))
    tv = 0.5 * float(np.abs(pv.probabilities - pe.probabilities).sum())
    return gap, 2.0 * loss_bound * tv
