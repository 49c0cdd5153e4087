"""Batch proposal rules.

Every strategy is a pure function from (posterior state, round index,
configuration, random stream) to an ordered batch of grid indices.  The
confidence-bound strategies are deterministic given the posterior; all other
strategies are deterministic given the stream's seed.  Canonical strategy
identifiers (used in configs and on the command line):

``ts``, ``hal-ts``, ``gp-bucb``, ``ucb-pe``, ``ucb-dpp-sample``, ``dpp-ts``,
``dpp-ts-alt``, ``phe``, ``dpp-phe``, ``uniform``, ``pure-dpp``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dpp import (
    Batch,
    _pmax_proposal,
    default_chain_steps,
    mcmc_single_swap,
    mutual_information_ensemble,
    sample_dpp_batches,
)
from .errors import ConfigurationError
from .features import FeatureModel, phe_draws
from .gp import (
    DomainGrid,
    GaussianPosterior,
    History,
    hallucinate,
    thompson_draw,
    thompson_draws,
)

STRATEGY_NAMES = (
    "ts",
    "hal-ts",
    "gp-bucb",
    "ucb-pe",
    "ucb-dpp-sample",
    "dpp-ts",
    "dpp-ts-alt",
    "phe",
    "dpp-phe",
    "uniform",
    "pure-dpp",
)


@dataclass(frozen=True)
class LambdaSchedule:
    """Kernel strength over rounds: constant, or on for the first T_init rounds.

    The step mode turns determinant reweighting into a pure initialization
    phase: full strength while ``t <= t_init``, plain posterior sampling
    afterwards.
    """

    mode: str = "constant"
    lam: float = 1.0
    t_init: int = 0

    def __post_init__(self):
        if self.mode not in ("constant", "step"):
            raise ConfigurationError(f"unknown lambda schedule mode: {self.mode!r}")
        if self.lam < 0 or self.t_init < 0:
            raise ConfigurationError("lambda and t_init must be non-negative")

    def value(self, t: int) -> float:
        if self.mode == "constant":
            return self.lam
        return self.lam if t <= self.t_init else 0.0


@dataclass(frozen=True)
class BetaSchedule:
    """Confidence-width schedule for the UCB family of strategies.

    ``fixed`` pins beta_t to a constant; the boundary behaviors of the UCB
    strategies (pure mean greed at 0, an all-grid plausible region for huge
    values) are only reachable through it.
    """

    case: str = "finite-domain"
    dim: int | None = None
    grad_a: float | None = None
    grad_b: float | None = None
    value_fixed: float | None = None

    def __post_init__(self):
        if self.case not in ("finite-domain", "continuous-domain", "fixed"):
            raise ConfigurationError(f"unknown beta schedule case: {self.case!r}")
        if self.case == "fixed" and self.value_fixed is None:
            raise ConfigurationError("fixed beta schedule needs a value")

    def value(self, t: int, batch_size: int, n_points: int) -> float:
        if self.case == "fixed":
            return float(self.value_fixed)
        return beta_schedule(
            self.case,
            t,
            batch_size,
            n_points=n_points,
            dim=self.dim,
            grad_a=self.grad_a,
            grad_b=self.grad_b,
        )


def beta_schedule(
    case: str,
    t: int,
    batch_size: int,
    n_points: float | None = None,
    dim: int | None = None,
    grad_a: float | None = None,
    grad_b: float | None = None,
) -> float:
    """Confidence parameter beta_t; non-decreasing in the round index.

    - ``finite-domain``:  2 ln(B (t^2 + 1) N / sqrt(2 pi))
    - ``continuous-domain``:  4 (d + 1) ln(B t) + 2 d ln(d a b sqrt(pi)),
      requiring the gradient tail constants a and b.
    """
    if t < 1:
        raise ConfigurationError("round index starts at 1")
    if case == "finite-domain":
        if n_points is None:
            raise ConfigurationError("finite-domain schedule needs the domain size")
        return 2.0 * math.log(batch_size * (t**2 + 1) * n_points / math.sqrt(2.0 * math.pi))
    if case == "continuous-domain":
        if dim is None or grad_a is None or grad_b is None:
            raise ConfigurationError(
                "continuous-domain schedule needs dim and the gradient constants a, b"
            )
        return 4.0 * (dim + 1) * math.log(batch_size * t) + 2.0 * dim * math.log(
            dim * grad_a * grad_b * math.sqrt(math.pi)
        )
    raise ConfigurationError(f"unknown beta schedule case: {case!r}")


@dataclass(frozen=True)
class StrategyConfig:
    """Everything a strategy needs besides the posterior state itself."""

    strategy: str
    batch_size: int
    beta: BetaSchedule = field(default_factory=BetaSchedule)
    lam: LambdaSchedule = field(default_factory=LambdaSchedule)
    phe_a: float | None = None
    mcmc_steps: int | None = None

    def __post_init__(self):
        if self.strategy not in STRATEGY_NAMES:
            raise ConfigurationError(f"unknown strategy: {self.strategy!r}")
        if self.batch_size < 1:
            raise ConfigurationError("batch size must be >= 1")
        needs_a = self.strategy in ("phe", "dpp-phe")
        if needs_a and self.phe_a is None:
            raise ConfigurationError(f"{self.strategy} requires the pseudo-reward scale phe_a")
        if not needs_a and self.phe_a is not None:
            raise ConfigurationError("phe_a is only meaningful for phe/dpp-phe")
        if self.mcmc_steps is not None and self.mcmc_steps < 1:
            raise ConfigurationError("mcmc_steps must be >= 1 when given")

    def chain_steps(self, batch_size: int, domain_size: int) -> int:
        if self.mcmc_steps is not None:
            return self.mcmc_steps
        return default_chain_steps(batch_size, domain_size)


def propose_ts(posterior: GaussianPosterior, batch_size: int, rng) -> Batch:
    """Independent posterior-argmax draws, one per slot."""
    return tuple(int(i) for i in thompson_draws(posterior, batch_size, rng))


def propose_hal_ts(posterior: GaussianPosterior, batch_size: int, rng) -> Batch:
    """Posterior-argmax draws with a fake mean observation folded in after each slot."""
    batch = []
    current = posterior
    for _ in range(batch_size):
        idx = thompson_draw(current, rng)
        batch.append(idx)
        current = hallucinate(current, idx)
    return tuple(batch)


def propose_gp_bucb(
    posterior: GaussianPosterior, batch_size: int, t: int, config: StrategyConfig, rng=None
) -> Batch:
    """Sequential confidence-bound maximization on the hallucinated posterior.

    Deterministic given the posterior: argmax ties go to the lowest index.
    """
    beta = config.beta.value(t, batch_size, posterior.size)
    root = math.sqrt(max(beta, 0.0))
    batch = []
    current = posterior
    for _ in range(batch_size):
        idx = int(np.argmax(current.mean + root * current.std()))
        batch.append(idx)
        current = hallucinate(current, idx)
    return tuple(batch)


def plausible_maximizer_region(posterior: GaussianPosterior, beta: float) -> np.ndarray:
    """Indices whose upper bound reaches the best lower bound.

    The confidence-bound argmax always qualifies, so the region is never
    empty.
    """
    root = math.sqrt(max(beta, 0.0))
    sd = posterior.std()
    upper = posterior.mean + root * sd
    lower = posterior.mean - root * sd
    region = np.flatnonzero(upper >= lower.max())
    assert region.size > 0
    return region


def propose_ucb_pe(
    posterior: GaussianPosterior, batch_size: int, t: int, config: StrategyConfig, rng=None
) -> Batch:
    """Confidence-bound argmax, then uncertainty sampling inside the
    plausible-maximizer region with hallucinated variance updates."""
    beta = config.beta.value(t, batch_size, posterior.size)
    root = math.sqrt(max(beta, 0.0))
    region = plausible_maximizer_region(posterior, beta)
    first = int(np.argmax(posterior.mean + root * posterior.std()))
    batch = [first]
    current = hallucinate(posterior, first)
    for _ in range(batch_size - 1):
        sd = current.std()
        idx = int(region[np.argmax(sd[region])])
        batch.append(idx)
        current = hallucinate(current, idx)
    return tuple(batch)


def propose_ucb_dpp_sample(
    posterior: GaussianPosterior, batch_size: int, t: int, config: StrategyConfig, rng=None
) -> Batch:
    """Confidence-bound argmax plus a DPP-sampled tail over the plausible region.

    The tail kernel is the information-gain kernel of the posterior with the
    first point hallucinated in; the chain proposes uniformly over the
    region, so its stationary law is the determinant-weighted (B-1)-batch
    distribution restricted there.  The regularized kernel keeps duplicate
    picks legal even when the region is smaller than the tail.
    """
    if rng is None:
        raise ConfigurationError("ucb-dpp-sample draws its tail at random and needs an rng")
    beta = config.beta.value(t, batch_size, posterior.size)
    root = math.sqrt(max(beta, 0.0))
    region = plausible_maximizer_region(posterior, beta)
    first = int(np.argmax(posterior.mean + root * posterior.std()))
    if batch_size == 1:
        return (first,)
    lens = mutual_information_ensemble(hallucinate(posterior, first), 1.0)
    steps = config.chain_steps(batch_size - 1, region.size)

    def uniform_over_region(n, stream):
        return region[stream.integers(0, region.size, size=n)]

    tail = sample_dpp_batches(
        lens, batch_size - 1, steps, rng, uniform_over_region, method="single-swap"
    )[0]
    return (first, *[int(i) for i in tail])


def propose_dpp_ts(
    posterior: GaussianPosterior, batch_size: int, config: StrategyConfig, t: int, rng=None
) -> Batch:
    """Determinant-reweighted batched posterior sampling.

    Targets ``prod_b p_max(x_b) * det(I + lam_t K_t / sigma^2 |_X)`` via the
    single-swap chain with fresh posterior-argmax proposals.
    """
    if rng is None:
        raise ConfigurationError("dpp-ts needs an rng")
    lam = config.lam.value(t)
    lens = mutual_information_ensemble(posterior, lam)
    steps = config.chain_steps(batch_size, posterior.size)
    return mcmc_single_swap(posterior, lens, batch_size, steps, rng)


def propose_dpp_ts_alt(
    posterior: GaussianPosterior, batch_size: int, config: StrategyConfig, t: int, rng=None
) -> Batch:
    """Variant that draws slot 1 by plain posterior sampling.

    The remaining slots sample the determinant-reweighted joint law
    conditioned on the first point: the chain swaps only slots 2..B while
    the acceptance determinant covers the whole batch, so the tail is
    repelled from the fixed slot as well as from itself.  Kernel and
    proposals both come from the round-start posterior.
    """
    if rng is None:
        raise ConfigurationError("dpp-ts-alt needs an rng")
    first = thompson_draw(posterior, rng)
    if batch_size == 1:
        return (first,)
    lam = config.lam.value(t)
    lens = mutual_information_ensemble(posterior, lam)
    steps = config.chain_steps(batch_size - 1, posterior.size)
    tail_init = thompson_draws(posterior, batch_size - 1, rng)
    initial = np.concatenate([[first], tail_init])[None, :]
    out = sample_dpp_batches(
        lens,
        batch_size,
        steps,
        rng,
        _pmax_proposal(posterior),
        method="single-swap",
        initial=initial,
        frozen_slots=1,
    )
    return tuple(int(i) for i in out[0])


def propose_phe(
    model: FeatureModel, history, batch_size: int, scale: float, rng=None
) -> Batch:
    """Perturbed-history exploration: per slot, refit on a freshly noised
    history and take the fitted-mean argmax."""
    if rng is None:
        raise ConfigurationError("phe needs an rng")
    return tuple(int(i) for i in phe_draws(model, history, scale, batch_size, rng))


def propose_dpp_phe(
    model: FeatureModel,
    history,
    batch_size: int,
    scale: float,
    config: StrategyConfig,
    t: int,
    rng=None,
) -> Batch:
    """Determinant-reweighted perturbed-history exploration.

    Single-swap chain whose proposals are single-slot perturbed-history
    draws and whose kernel is the information-gain kernel of the feature
    model's induced posterior.
    """
    if rng is None:
        raise ConfigurationError("dpp-phe needs an rng")
    induced = model.induced_posterior(history)
    lens = mutual_information_ensemble(induced, config.lam.value(t))
    steps = config.chain_steps(batch_size, model.grid.size)

    def phe_proposal(n, stream):
        return phe_draws(model, history, scale, n, stream)

    out = sample_dpp_batches(
        lens, batch_size, steps, rng, phe_proposal, method="single-swap"
    )[0]
    return tuple(int(i) for i in out)


def propose_uniform(grid, batch_size: int, rng=None) -> Batch:
    """Independent uniform indices over the grid."""
    if rng is None:
        raise ConfigurationError("uniform needs an rng")
    n = grid.size if isinstance(grid, DomainGrid) else int(grid)
    return tuple(int(i) for i in rng.integers(0, n, size=batch_size))


def propose_pure_dpp(
    posterior: GaussianPosterior, batch_size: int, config: StrategyConfig, rng=None
) -> Batch:
    """Diversity-only sampling: the determinant component alone.

    Uniform proposals with determinant-ratio acceptance leave the size-B DPP
    with the information-gain kernel as the stationary law.
    """
    if rng is None:
        raise ConfigurationError("pure-dpp needs an rng")
    lens = mutual_information_ensemble(posterior, 1.0)
    n = posterior.size
    steps = config.chain_steps(batch_size, n)

    def uniform_proposal(k, stream):
        return stream.integers(0, n, size=k)

    out = sample_dpp_batches(
        lens, batch_size, steps, rng, uniform_proposal, method="single-swap"
    )[0]
    return tuple(int(i) for i in out)


def propose_batch(
    config: StrategyConfig,
    t: int,
    rng,
    posterior: GaussianPosterior | None = None,
    model: FeatureModel | None = None,
    history: History | None = None,
) -> Batch:
    """Dispatch to the configured strategy, validating required inputs."""
    name = config.strategy
    b = config.batch_size
    if name in ("phe", "dpp-phe"):
        if model is None or history is None:
            raise ConfigurationError(f"{name} needs a feature model and a history")
    elif posterior is None:
        raise ConfigurationError(f"{name} needs a posterior")

    if name == "ts":
        return propose_ts(posterior, b, rng)
    if name == "hal-ts":
        return propose_hal_ts(posterior, b, rng)
    if name == "gp-bucb":
        return propose_gp_bucb(posterior, b, t, config)
    if name == "ucb-pe":
        return propose_ucb_pe(posterior, b, t, config)
    if name == "ucb-dpp-sample":
        return propose_ucb_dpp_sample(posterior, b, t, config, rng)
    if name == "dpp-ts":
        return propose_dpp_ts(posterior, b, config, t, rng)
    if name == "dpp-ts-alt":
        return propose_dpp_ts_alt(posterior, b, config, t, rng)
    if name == "phe":
        return propose_phe(model, history, b, config.phe_a, rng)
    if name == "dpp-phe":
        return propose_dpp_phe(model, history, b, config.phe_a, config, t, rng)
    if name == "uniform":
        return propose_uniform(posterior.grid, b, rng)
    if name == "pure-dpp":
        return propose_pure_dpp(posterior, b, config, rng)
    raise ConfigurationError(f"unknown strategy: {name!r}")
