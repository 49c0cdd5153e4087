"""One batch from every strategy on the same posterior.

Shows the qualitative differences: independent posterior sampling repeats
itself, hallucination and determinant reweighting spread out, the
confidence-bound rules are deterministic.
"""

import numpy as np

from dppbatch import (
    DomainGrid,
    FeatureModel,
    GaussianPosterior,
    History,
    KernelSpec,
    Observation,
    StrategyConfig,
    gp_condition,
    propose_batch,
)

rng_seed = 7
grid = DomainGrid.uniform(((0.0, 1.0),), 48)
kernel = KernelSpec(lengthscale=0.1)
noise_var = 0.05**2

posterior = GaussianPosterior.prior(grid, kernel, noise_var)
history = History.empty()
obs = [Observation(5, 0.2), Observation(24, 0.9), Observation(40, 0.4)]
posterior = gp_condition(posterior, obs)
history = history.append_round(obs)

model = FeatureModel.build(grid, kernel, noise_var)

print(f"posterior mean peaks at index {int(np.argmax(posterior.mean))} of {grid.size}")
print(f"{'strategy':16s} batch (grid indices)")
for name in (
    "ts",
    "hal-ts",
    "gp-bucb",
    "ucb-pe",
    "ucb-dpp-sample",
    "dpp-ts",
    "dpp-ts-alt",
    "pure-dpp",
    "uniform",
    "phe",
    "dpp-phe",
):
    kw = {"phe_a": 0.5} if name in ("phe", "dpp-phe") else {}
    config = StrategyConfig(strategy=name, batch_size=5, **kw)
    batch = propose_batch(
        config,
        t=2,
        rng=np.random.default_rng(rng_seed),
        posterior=posterior,
        model=model,
        history=history,
    )
    print(f"{name:16s} {batch}")
