"""Finite-domain Gaussian process machinery.

Everything operates on a fixed evaluation grid: the posterior is a plain
(mean vector, covariance matrix) pair, conditioning is exact dense linear
algebra, and joint function draws come from a cached symmetric factor of the
covariance.  All objects are immutable after construction; operations return
new values, so they are safe to share across parallel workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .errors import ConfigurationError, NumericalError

# Relative eigenvalue tolerance for "numerically PSD": eigenvalues of a
# covariance may dip below zero by at most this fraction of trace/N before we
# refuse to repair and raise instead.
PSD_RTOL = 1e-8

# Condition-number ceiling for the observation system (K_obs + sigma^2 I).
CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class DomainGrid:
    """Finite evaluation domain: N distinct d-dimensional points.

    The integer position of a point in ``points`` is its canonical identity
    everywhere in this package (batches, observations, truth tables).
    """

    points: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ConfigurationError("grid needs at least one point")
        if np.unique(pts, axis=0).shape[0] != pts.shape[0]:
            raise ConfigurationError("grid points must be distinct")
        object.__setattr__(self, "points", pts)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    @staticmethod
    def uniform(bounds: Sequence[tuple[float, float]], resolution: int) -> "DomainGrid":
        """Dense tensor grid with `resolution` points per axis over a box."""
        axes = [np.linspace(lo, hi, resolution) for lo, hi in bounds]
        if len(axes) == 1:
            pts = axes[0][:, None]
        else:
            mesh = np.meshgrid(*axes, indexing="ij")
            pts = np.stack([m.ravel() for m in mesh], axis=-1)
        return DomainGrid(pts)


@dataclass(frozen=True)
class KernelSpec:
    """Stationary squared-exponential kernel.

    ``k(x, x') = output_scale * exp(-||x - x'||^2 / (2 * lengthscale^2))``

    ``output_scale`` defaults to 1 so the prior variance is bounded by 1;
    zero is tolerated as the degenerate constant-zero prior used in tests.
    """

    lengthscale: float
    output_scale: float = 1.0
    family: str = "squared-exponential"

    def __post_init__(self):
        if self.family != "squared-exponential":
            raise ConfigurationError(f"unsupported kernel family: {self.family!r}")
        if not self.lengthscale > 0:
            raise ConfigurationError("lengthscale must be positive")
        if self.output_scale < 0:
            raise ConfigurationError("output scale must be non-negative")

    @staticmethod
    def from_bandwidth(gamma: float, convention: str = "variance") -> "KernelSpec":
        """Build a kernel from a scalar bandwidth parameter.

        ``convention="variance"`` reads gamma as the squared lengthscale,
        i.e. ``k = exp(-r^2 / (2 * gamma))``; ``convention="lengthscale"``
        reads it as the lengthscale itself.  Both interpretations are kept
        available because published configurations are ambiguous about which
        one they mean.
        """
        if convention == "variance":
            return KernelSpec(lengthscale=float(np.sqrt(gamma)))
        if convention == "lengthscale":
            return KernelSpec(lengthscale=float(gamma))
        raise ConfigurationError(f"unknown bandwidth convention: {convention!r}")


def kernel_eval(spec: KernelSpec, x, x2) -> float:
    """Evaluate the kernel on a single pair of points."""
    a = np.atleast_1d(np.asarray(x, dtype=float))
    b = np.atleast_1d(np.asarray(x2, dtype=float))
    if a.shape != b.shape:
        raise ConfigurationError(f"point dimensions differ: {a.shape} vs {b.shape}")
    sq = float(np.sum((a - b) ** 2))
    return spec.output_scale * float(np.exp(-sq / (2.0 * spec.lengthscale**2)))


def gram_matrix(spec: KernelSpec, points: np.ndarray, points2: np.ndarray | None = None) -> np.ndarray:
    """Kernel matrix between two point sets (same set when `points2` is None)."""
    a = np.atleast_2d(points)
    b = a if points2 is None else np.atleast_2d(points2)
    if a.shape[1] != b.shape[1]:
        raise ConfigurationError("point sets have different dimension")
    sq = (
        np.sum(a**2, axis=1)[:, None]
        + np.sum(b**2, axis=1)[None, :]
        - 2.0 * a @ b.T
    )
    np.maximum(sq, 0.0, out=sq)
    return spec.output_scale * np.exp(-sq / (2.0 * spec.lengthscale**2))


@dataclass(frozen=True)
class Observation:
    """A single noisy reward at a grid index."""

    index: int
    y: float


@dataclass(frozen=True)
class History:
    """Observations grouped by proposal round.

    A complete round holds exactly the batch size of observations; partial
    rounds are legal only inside hallucinated lookahead contexts, so no batch
    size is enforced here.
    """

    rounds: tuple[tuple[Observation, ...], ...] = ()

    @staticmethod
    def empty() -> "History":
        return History(())

    def append_round(self, observations: Iterable[Observation]) -> "History":
        return History(self.rounds + (tuple(observations),))

    def all_observations(self) -> list[Observation]:
        return [obs for rnd in self.rounds for obs in rnd]

    def __len__(self) -> int:
        return len(self.rounds)


class _ObservationChain:
    """Root prior plus all observations folded in so far.

    Keeps the lower Cholesky factor of ``K0[obs, obs] + sigma^2 I`` and
    extends it by one block per conditioning call instead of refactoring.
    """

    __slots__ = ("prior_mean", "prior_cov", "indices", "values", "chol")

    def __init__(self, prior_mean, prior_cov, indices, values, chol):
        self.prior_mean = prior_mean
        self.prior_cov = prior_cov
        self.indices = indices  # 1-d int array, one entry per observation slot
        self.values = values
        self.chol = chol  # lower-triangular (m, m) or None when m == 0

    @staticmethod
    def root(prior_mean, prior_cov) -> "_ObservationChain":
        return _ObservationChain(
            prior_mean, prior_cov, np.zeros(0, dtype=int), np.zeros(0), None
        )

    def extended(self, new_indices, new_values, noise_var) -> "_ObservationChain":
        k0 = self.prior_cov
        old = self.indices
        new = np.asarray(new_indices, dtype=int)
        d = k0[np.ix_(new, new)] + noise_var * np.eye(len(new))
        try:
            if self.chol is None:
                chol = np.linalg.cholesky(d)
            else:
                b = k0[np.ix_(old, new)]
                l21 = solve_triangular(self.chol, b, lower=True).T
                s22 = d - l21 @ l21.T
                l22 = np.linalg.cholesky(s22)
                m, k = len(old), len(new)
                chol = np.zeros((m + k, m + k))
                chol[:m, :m] = self.chol
                chol[m:, :m] = l21
                chol[m:, m:] = l22
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"observation system is numerically indefinite: {exc}")
        diag = np.diag(chol)
        if (diag.max() / diag.min()) ** 2 > CONDITION_LIMIT:
            raise NumericalError(
                "observation system condition number exceeds "
                f"{CONDITION_LIMIT:.0e}"
            )
        return _ObservationChain(
            self.prior_mean,
            self.prior_cov,
            np.concatenate([old, new]),
            np.concatenate([self.values, np.asarray(new_values, dtype=float)]),
            chol,
        )

    def posterior_moments(self, noise_var) -> tuple[np.ndarray, np.ndarray]:
        if len(self.indices) == 0:
            return self.prior_mean.copy(), self.prior_cov.copy()
        a = self.prior_cov[:, self.indices]  # (N, m)
        v = solve_triangular(self.chol, a.T, lower=True)  # (m, N)
        u = solve_triangular(
            self.chol, self.values - self.prior_mean[self.indices], lower=True
        )
        mean = self.prior_mean + v.T @ u
        cov = self.prior_cov - v.T @ v
        return mean, 0.5 * (cov + cov.T)


class GaussianPosterior:
    """Exact GP posterior over a finite grid.

    Holds the current mean vector and covariance matrix together with the
    observation noise variance.  Conditioning returns a new posterior; the
    original is untouched.  A symmetric factor of the covariance (for joint
    path draws) is computed lazily, once, with eigenvalue clipping limited to
    the numerical PSD tolerance.
    """

    def __init__(self, grid: DomainGrid, mean, cov, noise_var: float, _chain=None):
        if not noise_var > 0:
            raise ConfigurationError("noise variance must be positive")
        mean = np.asarray(mean, dtype=float).reshape(-1)
        cov = np.asarray(cov, dtype=float)
        n = grid.size
        if mean.shape != (n,) or cov.shape != (n, n):
            raise ConfigurationError("mean/covariance shape does not match the grid")
        self.grid = grid
        self.mean = mean
        self.cov = 0.5 * (cov + cov.T)
        self.noise_var = float(noise_var)
        self._chain = _chain
        self._factor = None

    @staticmethod
    def prior(
        grid: DomainGrid, kernel: KernelSpec, noise_var: float, mean=None
    ) -> "GaussianPosterior":
        mu = np.zeros(grid.size) if mean is None else np.asarray(mean, dtype=float)
        cov = gram_matrix(kernel, grid.points)
        return GaussianPosterior(grid, mu, cov, noise_var)

    @property
    def size(self) -> int:
        return self.grid.size

    def std(self) -> np.ndarray:
        """Pointwise posterior standard deviations sqrt(diag K)."""
        return np.sqrt(np.maximum(np.diag(self.cov), 0.0))

    def _path_factor(self) -> np.ndarray:
        if self._factor is None:
            w, v = np.linalg.eigh(self.cov)
            trace = float(np.trace(self.cov))
            tol = PSD_RTOL * max(trace, 0.0) / self.size
            # allowance for plain float rounding at the matrix's own scale
            tol += 64 * np.finfo(float).eps * max(1e-300, float(np.abs(self.cov).max()))
            if w.min() < -tol:
                raise NumericalError(
                    f"covariance is indefinite beyond tolerance: min eig {w.min():.3e}"
                )
            self._factor = v * np.sqrt(np.clip(w, 0.0, None))
        return self._factor


def gp_condition(
    posterior: GaussianPosterior, observations: Sequence[Observation]
) -> GaussianPosterior:
    """Condition on additional noisy observations; exact and order-independent.

    Conditioning always refers back to the root prior of the posterior's
    observation chain, extending the cached Cholesky factor by one block, so
    repeated calls cost one triangular solve each instead of a refactor.
    """
    if len(observations) == 0:
        return posterior
    n = posterior.size
    idx = np.array([o.index for o in observations], dtype=int)
    if idx.min() < 0 or idx.max() >= n:
        raise ConfigurationError("observation index outside the grid")
    ys = np.array([o.y for o in observations], dtype=float)
    chain = posterior._chain
    if chain is None:
        chain = _ObservationChain.root(posterior.mean, posterior.cov)
    chain = chain.extended(idx, ys, posterior.noise_var)
    mean, cov = chain.posterior_moments(posterior.noise_var)
    new = GaussianPosterior(posterior.grid, mean, cov, posterior.noise_var, _chain=chain)
    slack = 1e-9 * max(1.0, float(np.abs(posterior.cov).max()))
    if np.any(np.diag(new.cov) > np.diag(posterior.cov) + slack):
        raise NumericalError("conditioning increased a posterior variance")
    return new


def hallucinate(posterior: GaussianPosterior, index: int) -> GaussianPosterior:
    """Condition on a fake reward equal to the current posterior mean.

    Leaves the mean unchanged and shrinks the variance at ``index`` (strictly,
    whenever it was positive), which is exactly what delayed-feedback batch
    rules need for within-batch lookahead.
    """
    return gp_condition(posterior, [Observation(int(index), float(posterior.mean[index]))])


def gp_sample_path(posterior: GaussianPosterior, rng: np.random.Generator) -> np.ndarray:
    """One joint draw of the function over the whole grid."""
    z = rng.standard_normal(posterior.size)
    return posterior.mean + posterior._path_factor() @ z


def sample_paths(posterior: GaussianPosterior, n: int, rng: np.random.Generator) -> np.ndarray:
    """Stack of ``n`` independent joint draws, shape (n, N)."""
    z = rng.standard_normal((n, posterior.size))
    return posterior.mean + z @ posterior._path_factor().T


def argmax_with_ties(values: np.ndarray, rng: np.random.Generator) -> int:
    """Index of the maximum, ties resolved uniformly at random."""
    values = np.asarray(values)
    winners = np.flatnonzero(values == values.max())
    if winners.size == 1:
        return int(winners[0])
    return int(winners[rng.integers(winners.size)])


def _rows_argmax_with_ties(paths: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    top = paths.max(axis=1, keepdims=True)
    ties = paths == top
    noise = rng.random(paths.shape)
    return np.argmax(np.where(ties, noise, -1.0), axis=1)


def thompson_draw(posterior: GaussianPosterior, rng: np.random.Generator) -> int:
    """Argmax of one posterior path draw: a single maximum-distribution sample."""
    return argmax_with_ties(gp_sample_path(posterior, rng), rng)


def thompson_draws(posterior: GaussianPosterior, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` independent maximum-distribution samples, vectorized over draws."""
    return _rows_argmax_with_ties(sample_paths(posterior, n, rng), rng)
