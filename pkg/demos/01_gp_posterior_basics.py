"""Tour of the exact GP layer: conditioning, joint draws, hallucination.

Everything lives on a fixed grid, so the posterior is just a mean vector and
a covariance matrix, and all updates are dense linear algebra.
"""

import numpy as np

from dppbatch import (
    DomainGrid,
    GaussianPosterior,
    KernelSpec,
    Observation,
    gp_condition,
    hallucinate,
    sample_paths,
)

rng = np.random.default_rng(0)

# A 1-d grid of 200 points and a fairly wiggly squared-exponential prior.
grid = DomainGrid.uniform(((0.0, 1.0),), 200)
kernel = KernelSpec(lengthscale=0.08)
prior = GaussianPosterior.prior(grid, kernel, noise_var=0.01**2)
print(f"prior: {prior.size} points, sd everywhere {prior.std()[0]:.2f}")

# Condition on a handful of noisy observations of a secret function.
secret = np.sin(7 * grid.points[:, 0]) * np.exp(-grid.points[:, 0])
observed = [20, 60, 90, 150]
obs = [Observation(i, secret[i] + 0.01 * rng.standard_normal()) for i in observed]
posterior = gp_condition(prior, obs)
print("observed indices:", observed)
print("posterior sd at observed points:", np.round(posterior.std()[observed], 4))
print("posterior sd midway between:    ", np.round(posterior.std()[[40, 75, 120]], 4))

# Joint path draws: these are the backbone of every sampling strategy.
paths = sample_paths(posterior, 5, rng)
print("\nfive joint draws, value at x=0.5:", np.round(paths[:, 100], 3))
print("argmax of each draw:", [int(np.argmax(p)) for p in paths])

# Hallucination: condition on a fake reward equal to the current mean.
# The mean stays put while the variance at that point collapses, which is
# how the batch rules look ahead without real feedback.
lookahead = hallucinate(posterior, 100)
print("\nhallucinating index 100:")
print("  mean drift:", float(np.abs(lookahead.mean - posterior.mean).max()))
print(
    "  sd at 100:",
    round(float(posterior.std()[100]), 4),
    "->",
    round(float(lookahead.std()[100]), 4),
)
