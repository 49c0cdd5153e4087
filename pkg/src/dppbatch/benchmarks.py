"""Ground-truth objectives, the noisy observation model, regret accounting,
and information-gain diagnostics.

The named test functions are minimization problems in the literature; the
optimization loop maximizes, so the truth table stores their negation.
``eval_objective`` returns the literature formula unchanged — keep the sign
convention in mind when comparing raw values against truth tables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, NumericalError
from .gp import DomainGrid, GaussianPosterior, KernelSpec, gram_matrix, hallucinate

OBJECTIVE_KINDS = ("gp-sample", "rosenbrock", "styblinski-tang", "michalewicz")

STANDARD_BOUNDS = {
    "gp-sample": (0.0, 1.0),
    "rosenbrock": (-2.0, 2.0),
    "styblinski-tang": (-5.0, 5.0),
    "michalewicz": (0.0, math.pi),
}


@dataclass(frozen=True)
class ObjectiveSpec:
    """What to optimize: an objective family, its box, and the grid over it."""

    kind: str
    dimension: int
    bounds: tuple[tuple[float, float], ...]
    resolution: int
    noise_sd: float = 0.01

    def __post_init__(self):
        if self.kind not in OBJECTIVE_KINDS:
            raise ConfigurationError(f"unknown objective: {self.kind!r}")
        if self.dimension < 1 or len(self.bounds) != self.dimension:
            raise ConfigurationError("bounds must list one (lo, hi) pair per dimension")
        if self.kind == "rosenbrock" and self.dimension != 2:
            raise ConfigurationError("the rosenbrock objective is two-dimensional")
        if self.resolution < 2:
            raise ConfigurationError("grid resolution must be at least 2")
        if self.noise_sd < 0:
            raise ConfigurationError("noise level must be non-negative")
        object.__setattr__(
            self, "bounds", tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        )

    @staticmethod
    def standard(
        kind: str,
        dimension: int | None = None,
        resolution: int | None = None,
        noise_sd: float = 0.01,
    ) -> "ObjectiveSpec":
        """Conventional box and grid density for each objective family."""
        if dimension is None:
            dimension = 2 if kind in ("rosenbrock", "styblinski-tang", "michalewicz") else 1
        if resolution is None:
            resolution = 1024 if dimension == 1 else 64
        box = STANDARD_BOUNDS.get(kind)
        if box is None:
            raise ConfigurationError(f"unknown objective: {kind!r}")
        return ObjectiveSpec(kind, dimension, (box,) * dimension, resolution, noise_sd)

    def make_grid(self) -> DomainGrid:
        return DomainGrid.uniform(self.bounds, self.resolution)


def eval_objective(spec: ObjectiveSpec, x) -> float:
    """Literature formula for the named objectives (minimization sign)."""
    pt = np.atleast_1d(np.asarray(x, dtype=float))
    if pt.shape != (spec.dimension,):
        raise ConfigurationError("point dimension does not match the objective")
    if spec.kind == "rosenbrock":
        x1, x2 = pt
        return float(100.0 * (x2 - x1**2) ** 2 + (x1 - 1.0) ** 2)
    if spec.kind == "styblinski-tang":
        return float(0.5 * np.sum(pt**4 - 16.0 * pt**2 + 5.0 * pt))
    if spec.kind == "michalewicz":
        i = np.arange(1, spec.dimension + 1)
        return float(
            -np.sum(np.sin(pt) * np.sin(i * pt**2 / math.pi) ** (2 * spec.dimension))
        )
    raise ConfigurationError("a sampled objective has no closed form; build a truth table")


def sample_gp_objective(
    kernel: KernelSpec, grid: DomainGrid, rng: np.random.Generator
) -> np.ndarray:
    """One joint draw of a zero-mean GP prior over the grid."""
    cov = gram_matrix(kernel, grid.points)
    w, v = np.linalg.eigh(cov)
    tol = 1e-8 * max(float(np.trace(cov)), 0.0) / grid.size
    if w.min() < -(tol + 64 * np.finfo(float).eps * max(1.0, float(np.abs(cov).max()))):
        raise NumericalError(f"prior kernel matrix is indefinite: min eig {w.min():.3e}")
    factor = v * np.sqrt(np.clip(w, 0.0, None))
    return factor @ rng.standard_normal(grid.size)


@dataclass(frozen=True)
class GroundTruth:
    """Truth table over the grid in maximization sign, argmax cached."""

    values: np.ndarray
    argmax: int
    best: float

    @staticmethod
    def from_values(values: np.ndarray) -> "GroundTruth":
        values = np.asarray(values, dtype=float)
        if not np.all(np.isfinite(values)):
            raise NumericalError("truth table contains non-finite values")
        best_index = int(np.argmax(values))
        return GroundTruth(values, best_index, float(values[best_index]))

    @staticmethod
    def build(
        spec: ObjectiveSpec,
        grid: DomainGrid,
        kernel: KernelSpec | None = None,
        rng: np.random.Generator | None = None,
    ) -> "GroundTruth":
        if spec.kind == "gp-sample":
            if kernel is None or rng is None:
                raise ConfigurationError("a sampled objective needs a kernel and an rng")
            return GroundTruth.from_values(sample_gp_objective(kernel, grid, rng))
        raw = np.array([eval_objective(spec, p) for p in grid.points])
        return GroundTruth.from_values(-raw)


def observe(truth, index: int, noise_sd: float, rng: np.random.Generator) -> float:
    """Noisy reward at a grid index: truth plus centered Gaussian noise."""
    values = truth.values if isinstance(truth, GroundTruth) else np.asarray(truth)
    y = float(values[index])
    if noise_sd > 0:
        y += noise_sd * float(rng.standard_normal())
    return y


@dataclass(frozen=True)
class RegretTrace:
    """Per-evaluation and per-round regret series for one run.

    ``inst`` and the running ``simple``/``cumulative`` series have one entry
    per evaluation; ``batch_min`` and ``bbcr`` have one entry per round
    (bbcr is the running sum of within-round minima).
    """

    inst: np.ndarray = field(default_factory=lambda: np.zeros(0))
    batch_min: np.ndarray = field(default_factory=lambda: np.zeros(0))
    simple: np.ndarray = field(default_factory=lambda: np.zeros(0))
    cumulative: np.ndarray = field(default_factory=lambda: np.zeros(0))
    bbcr: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @staticmethod
    def empty() -> "RegretTrace":
        return RegretTrace()

    @property
    def rounds(self) -> int:
        return len(self.batch_min)


def update_regret(trace: RegretTrace, truth: GroundTruth, batch) -> RegretTrace:
    """Append one round of regrets; the monotone series invariants are asserted."""
    idx = np.asarray(batch, dtype=int)
    r = truth.best - truth.values[idx]
    last_simple = trace.simple[-1] if len(trace.simple) else np.inf
    simple_new = np.minimum.accumulate(np.minimum(last_simple, r))
    last_cum = trace.cumulative[-1] if len(trace.cumulative) else 0.0
    cum_new = last_cum + np.cumsum(r)
    last_bbcr = trace.bbcr[-1] if len(trace.bbcr) else 0.0
    out = RegretTrace(
        inst=np.concatenate([trace.inst, r]),
        batch_min=np.concatenate([trace.batch_min, [r.min()]]),
        simple=np.concatenate([trace.simple, simple_new]),
        cumulative=np.concatenate([trace.cumulative, cum_new]),
        bbcr=np.concatenate([trace.bbcr, [last_bbcr + r.min()]]),
    )
    assert np.all(np.diff(out.simple) <= 0.0) and np.all(np.diff(out.cumulative) >= 0.0)
    return out


def info_gain(posterior: GaussianPosterior, indices) -> float:
    """Half the log-determinant of the noise-scaled covariance restriction.

    Equals the sum of sequential conditional-variance terms
    ``0.5 * sum_b log(1 + var_b(x_b) / sigma^2)`` along any ordering of the
    indices, which is how much the observations at ``indices`` would teach us
    about the function.
    """
    idx = np.asarray(indices, dtype=int)
    if idx.size == 0:
        return 0.0
    sub = posterior.cov[np.ix_(idx, idx)] / posterior.noise_var + np.eye(idx.size)
    sign, logdet = np.linalg.slogdet(sub)
    if sign <= 0:
        raise NumericalError("information-gain matrix is numerically singular")
    return 0.5 * float(logdet)


def greedy_info_gain(posterior: GaussianPosterior, budget: int) -> tuple[list[int], float]:
    """Greedy maximizer of the information gain; a lower bound on the optimum.

    Exact maximization over subsets is out of reach, but the greedy value of
    a submodular monotone objective is within (1 - 1/e) of it, which makes
    this a usable capacity diagnostic.
    """
    chosen: list[int] = []
    gain = 0.0
    current = posterior
    for _ in range(budget):
        variances = np.diag(current.cov)
        idx = int(np.argmax(variances))
        gain += 0.5 * math.log1p(max(variances[idx], 0.0) / current.noise_var)
        chosen.append(idx)
        current = hallucinate(current, idx)
    return chosen, gain
