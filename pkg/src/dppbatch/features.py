"""Quadrature Fourier-feature surrogate for the squared-exponential GP.

The kernel's spectral measure is Gaussian, so Gauss-Hermite nodes give a
deterministic trigonometric feature map whose inner products reproduce the
kernel to quadrature accuracy.  Regression then happens in weight space:
a Bayesian linear model with standard-normal weight prior, which makes
history perturbation (for perturbed-history exploration) a cheap
re-solve of the same normal equations with a different right-hand side.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .errors import ConfigurationError, NumericalError
from .gp import (
    DomainGrid,
    GaussianPosterior,
    History,
    KernelSpec,
    Observation,
    _rows_argmax_with_ties,
    gram_matrix,
)

# Construction-time gate: induced prior kernel must match the exact kernel to
# this relative Frobenius error over the grid.
KERNEL_AGREEMENT_RTOL = 0.05

_NODE_CANDIDATES_1D = (16, 32, 64, 128, 256, 384)
_NODE_CANDIDATES_ND = (4, 6, 8, 12, 16, 24)


def _qff_feature_matrix(grid: DomainGrid, kernel: KernelSpec, nodes_per_dim: int) -> np.ndarray:
    """Feature matrix (N, 2 * nodes_per_dim^d) for the grid."""
    u, w = np.polynomial.hermite.hermgauss(nodes_per_dim)
    d = grid.dimension
    # tensor-product nodes: frequency vectors and product weights
    node_grids = np.meshgrid(*([u] * d), indexing="ij")
    weight_grids = np.meshgrid(*([w] * d), indexing="ij")
    omegas = np.stack([g.ravel() for g in node_grids], axis=-1)  # (n^d, d)
    omegas = omegas * (np.sqrt(2.0) / kernel.lengthscale)
    weights = np.prod(np.stack([g.ravel() for g in weight_grids], axis=-1), axis=-1)
    weights = weights / np.pi ** (d / 2.0)
    phase = grid.points @ omegas.T  # (N, n^d)
    amp = np.sqrt(kernel.output_scale * weights)
    return np.concatenate([amp * np.cos(phase), amp * np.sin(phase)], axis=1)


@dataclass(frozen=True)
class FeatureModel:
    """Finite feature map plus Gaussian weight prior N(0, I).

    The induced function prior ``phi(x)^T w`` approximates the exact GP
    prior; agreement within :data:`KERNEL_AGREEMENT_RTOL` is enforced at
    construction.
    """

    grid: DomainGrid
    kernel: KernelSpec
    noise_var: float
    features: np.ndarray  # (N, m)

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @staticmethod
    def build(
        grid: DomainGrid,
        kernel: KernelSpec,
        noise_var: float,
        nodes_per_dim: int | None = None,
    ) -> "FeatureModel":
        """Construct the feature map, auto-sizing it unless nodes are pinned.

        With ``nodes_per_dim=None`` the smallest candidate node count whose
        induced kernel passes the agreement gate is used.
        """
        if not noise_var > 0:
            raise ConfigurationError("noise variance must be positive")
        exact = gram_matrix(kernel, grid.points)
        scale = float(np.linalg.norm(exact))
        candidates = (
            (nodes_per_dim,)
            if nodes_per_dim is not None
            else (_NODE_CANDIDATES_1D if grid.dimension == 1 else _NODE_CANDIDATES_ND)
        )
        last_err = None
        for nodes in candidates:
            feats = _qff_feature_matrix(grid, kernel, nodes)
            err = float(np.linalg.norm(feats @ feats.T - exact))
            rel = err / scale if scale > 0 else 0.0
            if rel <= KERNEL_AGREEMENT_RTOL:
                return FeatureModel(grid, kernel, float(noise_var), feats)
            last_err = rel
        raise ConfigurationError(
            f"feature map cannot match the kernel within {KERNEL_AGREEMENT_RTOL:.0%} "
            f"(best relative error {last_err:.3f}); increase nodes_per_dim"
        )

    def induced_prior_kernel(self) -> np.ndarray:
        return self.features @ self.features.T

    def _solve_weights(self, indices: np.ndarray):
        """Cholesky of the weight-posterior precision I + Phi^T Phi / sigma^2."""
        phi = self.features[indices]
        m = self.n_features
        precision = np.eye(m) + (phi.T @ phi) / self.noise_var
        try:
            chol = np.linalg.cholesky(precision)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"weight-space normal equations failed: {exc}")
        return phi, chol

    def weight_posterior(self, observations) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean and lower Cholesky-of-precision for the weights."""
        idx, ys = _split_observations(observations)
        if idx.size == 0:
            m = self.n_features
            return np.zeros(m), np.eye(m)
        phi, chol = self._solve_weights(idx)
        mean = cho_solve((chol, True), phi.T @ ys) / self.noise_var
        return mean, chol

    def induced_posterior(self, observations) -> GaussianPosterior:
        """Grid-space Gaussian implied by the weight posterior."""
        mean_w, chol = self.weight_posterior(observations)
        half = solve_triangular(chol, self.features.T, lower=True)  # (m, N)
        cov = half.T @ half
        return GaussianPosterior(self.grid, self.features @ mean_w, cov, self.noise_var)


def _split_observations(observations) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(observations, History):
        observations = observations.all_observations()
    obs: Sequence[Observation] = list(observations)
    idx = np.array([o.index for o in obs], dtype=int)
    ys = np.array([o.y for o in obs], dtype=float)
    return idx, ys


def ff_fit_and_sample(
    model: FeatureModel, observations, rng: np.random.Generator
) -> np.ndarray:
    """Fit the weight posterior to a (possibly perturbed) history and draw a path.

    Sampling ``w = mean + L^{-T} z`` for ``L`` the precision factor gives a
    weight draw with exact posterior covariance; the returned vector is its
    function value over the whole grid.  With an unperturbed history this
    path is distributed as a joint posterior draw of the induced-kernel GP.
    """
    mean_w, chol = model.weight_posterior(observations)
    z = rng.standard_normal(model.n_features)
    w = mean_w + solve_triangular(chol, z, lower=True, trans="T")
    return model.features @ w


def phe_draws(
    model: FeatureModel,
    observations,
    scale: float,
    n: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """``n`` independent perturbed-history argmax draws, vectorized.

    Every draw adds fresh ``scale * N(0, 1)`` noise to each historical
    reward, refits the weight posterior mean, and returns the argmax of the
    fitted mean path.  With an empty history the fitted mean is replaced by
    a prior weight draw, the only source of randomness available.
    """
    if scale < 0:
        raise ConfigurationError("perturbation scale must be non-negative")
    idx, ys = _split_observations(observations)
    if idx.size == 0:
        w = rng.standard_normal((n, model.n_features))
        return _rows_argmax_with_ties(w @ model.features.T, rng)
    phi, chol = model._solve_weights(idx)
    perturbed = ys[None, :] + scale * rng.standard_normal((n, idx.size))
    rhs = phi.T @ perturbed.T / model.noise_var  # (m, n)
    weights = cho_solve((chol, True), rhs)  # (m, n)
    paths = weights.T @ model.features.T  # (n, N)
    return _rows_argmax_with_ties(paths, rng)
