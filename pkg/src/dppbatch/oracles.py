"""Self-contained correctness audits at enumeration scale.

Each suite checks a sampler or identity against an independent ground truth:
brute-force enumeration of batch distributions, closed-form transition
kernels, or sequential conditioning.  They power ``dppbatch oracle-check``
and are reused verbatim by the acceptance test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dpp import (
    LEnsemble,
    build_reweighted_lensemble,
    detailed_balance_check,
    empirical_distribution,
    estimate_pmax,
    exact_batch_distribution,
    mutual_information_ensemble,
    restricted_det,
    restricted_logdet,
    sample_dpp_batches,
    tv_distance,
    _pmax_proposal,
)
from .errors import ConfigurationError
from .gp import (
    DomainGrid,
    GaussianPosterior,
    KernelSpec,
    Observation,
    gp_condition,
    hallucinate,
)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def random_small_posterior(
    rng: np.random.Generator, n: int | None = None
) -> GaussianPosterior:
    """Generic conditioned posterior on a small 1-d grid, for randomized audits."""
    if n is None:
        n = int(rng.integers(3, 7))
    base = np.linspace(0.0, 1.0, n)
    jitter = rng.uniform(-0.3, 0.3, n) / max(n, 2)
    grid = DomainGrid((base + jitter)[:, None])
    kernel = KernelSpec(lengthscale=float(rng.uniform(0.15, 0.6)))
    noise_sd = float(rng.uniform(0.1, 0.6))
    posterior = GaussianPosterior.prior(grid, kernel, noise_sd**2)
    for _ in range(int(rng.integers(0, 3))):
        obs = [
            Observation(int(rng.integers(0, n)), float(rng.normal(0.0, 1.0)))
            for _ in range(int(rng.integers(1, 3)))
        ]
        posterior = gp_condition(posterior, obs)
    return posterior


def _stationarity_posterior() -> GaussianPosterior:
    """The fixed 4-point instance used by the sampler-stationarity audit."""
    grid = DomainGrid(np.array([[0.0], [1.0 / 3.0], [2.0 / 3.0], [1.0]]))
    posterior = GaussianPosterior.prior(grid, KernelSpec(lengthscale=0.35), 0.25)
    return gp_condition(posterior, [Observation(1, 0.6)])


def suite_mcmc_stationarity(
    chains: int = 10_000,
    steps: int = 200,
    batch_size: int = 2,
    reference_draws: int = 1_000_000,
    tolerance: float = 0.05,
    seed: int = 2024,
) -> list[CheckResult]:
    """Empirical law of each sampler vs the brute-force batch distribution."""
    rng = np.random.default_rng(seed)
    posterior = _stationarity_posterior()
    lens = mutual_information_ensemble(posterior, 1.0)
    pmax = estimate_pmax(posterior, reference_draws, rng)
    exact = exact_batch_distribution(lens, batch_size, pmax)
    proposal = _pmax_proposal(posterior)
    results = []
    for method in ("single-swap", "full-batch", "gibbs"):
        final = sample_dpp_batches(
            lens, batch_size, steps, rng, proposal, method=method, chains=chains
        )
        tv = tv_distance(empirical_distribution(final), exact)
        results.append(
            CheckResult(
                f"stationarity[{method}]",
                tv <= tolerance,
                f"TV={tv:.4f} (<= {tolerance}) over {chains} chains x {steps} steps",
            )
        )
    return results


def suite_detailed_balance(tolerance: float = 1e-10) -> list[CheckResult]:
    """Closed-form balance audit of the swap chain on a 3-point domain."""
    grid = DomainGrid(np.array([[0.0], [0.5], [1.0]]))
    posterior = GaussianPosterior.prior(grid, KernelSpec(lengthscale=0.4), 0.25)
    posterior = gp_condition(posterior, [Observation(0, 0.3)])
    lens = mutual_information_ensemble(posterior, 1.0)
    pmax = np.array([0.5, 0.3, 0.2])
    err = detailed_balance_check(lens, 2, pmax)
    results = [
        CheckResult(
            "detailed-balance[mi-kernel]",
            err <= tolerance,
            f"max relative error {err:.3e} (<= {tolerance:.0e})",
        )
    ]
    err_id = detailed_balance_check(LEnsemble.identity(3), 2, pmax)
    results.append(
        CheckResult(
            "detailed-balance[identity]",
            err_id <= 1e-12,
            f"max relative error {err_id:.3e} (<= 1e-12)",
        )
    )
    return results


def suite_reweighting(tolerance: float = 1e-9, seed: int = 7) -> list[CheckResult]:
    """det(L~_X) == prod p(x_b) det(L_X) over the full 4-point, size-2 enumeration."""
    rng = np.random.default_rng(seed)
    posterior = random_small_posterior(rng, n=4)
    lens = mutual_information_ensemble(posterior, 1.0)
    p = rng.dirichlet(np.ones(4))
    reweighted = build_reweighted_lensemble(lens, p)
    worst = 0.0
    import itertools

    for batch in itertools.product(range(4), repeat=2):
        lhs = restricted_det(reweighted, batch)
        rhs = float(np.prod(p[list(batch)])) * restricted_det(lens, batch)
        scale = max(abs(lhs), abs(rhs), 1e-300)
        worst = max(worst, abs(lhs - rhs) / scale)
    return [
        CheckResult(
            "reweighting-identity",
            worst <= tolerance,
            f"max relative error {worst:.3e} (<= {tolerance:.0e})",
        )
    ]


def suite_sequential_logdet(
    instances: int = 100, tolerance: float = 1e-8, seed: int = 11
) -> list[CheckResult]:
    """Restricted log-determinant vs the sequential conditional-variance sum.

    For the information-gain kernel, ``log det(I + K_X / s^2)`` must equal
    ``sum_b log(1 + var_b(x_b) / s^2)`` where ``var_b`` conditions on the
    batch prefix through fake mean observations.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        posterior = random_small_posterior(rng)
        n = posterior.size
        b = int(rng.integers(1, 4))
        batch = [int(rng.integers(0, n)) for _ in range(b)]
        lens = mutual_information_ensemble(posterior, 1.0)
        direct = restricted_logdet(lens, batch)
        seq = 0.0
        current = posterior
        for idx in batch:
            seq += float(np.log1p(max(current.cov[idx, idx], 0.0) / current.noise_var))
            current = hallucinate(current, idx)
        worst = max(worst, abs(direct - seq))
    return [
        CheckResult(
            "sequential-logdet",
            worst <= tolerance,
            f"max |difference| {worst:.3e} over {instances} instances (<= {tolerance:.0e})",
        )
    ]


def suite_marginal_variance(
    instances: int = 20, draws: int = 1_000_000, seed: int = 13
) -> list[CheckResult]:
    """Does determinant reweighting put mass on higher posterior deviation?

    Three variants of the same question, from weakest to strongest claim:

    - ``single-point``: the size-1 reweighted law is a monotone tilt of the
      maximum distribution in the posterior variance, so E[sd] must rise.
      Always true.
    - ``prefix-conditional``: fix the first batch slot; the conditional law
      of the second slot is a monotone tilt in the variance conditioned on
      the prefix, so E[conditional sd] must rise.  Always true.
    - ``joint-marginal``: E[sd] of an element of a size-2 batch under the
      joint reweighted law vs under the maximum distribution.  NOT
      guaranteed: with small observation noise the determinant favors high
      *conditional* variance, which can move mass off the highest-sd point
      (for example off its duplicate pairs) and lower the unconditional
      mean sd.  The check reports the measured worst gap honestly.
    """
    rng = np.random.default_rng(seed)
    worst_joint = np.inf
    worst_single = np.inf
    worst_conditional = np.inf
    for _ in range(instances):
        posterior = random_small_posterior(rng)
        lens = mutual_information_ensemble(posterior, 1.0)
        pmax = estimate_pmax(posterior, draws, rng)
        p = pmax.probabilities
        sd = posterior.std()

        dist = exact_batch_distribution(lens, 2, pmax)
        under_dpp = sum(
            prob * float(np.mean(sd[list(batch)])) for batch, prob in dist.items()
        )
        worst_joint = min(worst_joint, under_dpp - float(p @ sd))

        single = exact_batch_distribution(lens, 1, pmax)
        under_single = sum(prob * sd[batch[0]] for batch, prob in single.items())
        worst_single = min(worst_single, under_single - float(p @ sd))

        for first in range(posterior.size):
            if p[first] == 0.0:
                continue
            hal = hallucinate(posterior, first)
            var = np.maximum(np.diag(hal.cov), 0.0)
            cond_sd = np.sqrt(var)
            tilt = p * (1.0 + var / posterior.noise_var)
            tilt = tilt / tilt.sum()
            worst_conditional = min(
                worst_conditional, float(tilt @ cond_sd) - float(p @ cond_sd)
            )
    tol = -1e-12
    return [
        CheckResult(
            "marginal-variance[single-point]",
            worst_single >= tol,
            f"min E[sd] gap {worst_single:.3e} over {instances} instances (>= 0)",
        ),
        CheckResult(
            "marginal-variance[prefix-conditional]",
            worst_conditional >= tol,
            f"min E[conditional sd] gap {worst_conditional:.3e} (>= 0)",
        ),
        CheckResult(
            "marginal-variance[joint-marginal]",
            worst_joint >= tol,
            f"min E[sd] gap {worst_joint:.3e} over {instances} instances (>= 0)",
        ),
    ]


SUITES = {
    "mcmc-stationarity": suite_mcmc_stationarity,
    "detailed-balance": suite_detailed_balance,
    "reweighting": suite_reweighting,
    "sequential-logdet": suite_sequential_logdet,
    "marginal-variance": suite_marginal_variance,
}


def run_suite(name: str) -> list[CheckResult]:
    if name == "all":
        out = []
        for fn in SUITES.values():
            out.extend(fn())
        return out
    if name not in SUITES:
        raise ConfigurationError(
            f"unknown suite {name!r}; choose from {', '.join(SUITES)} or 'all'"
        )
    return SUITES[name]()
