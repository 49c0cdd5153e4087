"""Replicated-experiment runner: configuration, execution, aggregation, CSV.

Determinism contract: (config, master seed) fixes every output byte.  Random
streams are derived with counter-based spawn keys of the form
(replication, purpose, round, slot), so neither execution order nor the
number of workers can change a result.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .benchmarks import GroundTruth, ObjectiveSpec, RegretTrace, observe, update_regret
from .errors import ConfigurationError, NumericalError
from .features import FeatureModel
from .gp import GaussianPosterior, History, KernelSpec, Observation
from .strategies import BetaSchedule, LambdaSchedule, StrategyConfig, propose_batch

RUN_CSV_FIXED_COLUMNS = (
    "run_id",
    "t",
    "b",
    "index",
)
RUN_CSV_TAIL_COLUMNS = (
    "y",
    "inst_regret",
    "batch_min_regret",
    "simple_regret",
    "cum_regret",
    "bbcr",
)
AGGREGATE_CSV_COLUMNS = ("t", "mean_simple", "se_simple", "mean_cum", "se_cum", "n_runs")


@dataclass(frozen=True)
class ModelConfig:
    """Internal surrogate: kernel, assumed noise, exact GP or feature model."""

    kernel: KernelSpec
    noise_sd: float = 0.01
    surrogate: str = "exact"
    feature_nodes: int | None = None

    def __post_init__(self):
        if self.surrogate not in ("exact", "feature"):
            raise ConfigurationError(f"unknown surrogate: {self.surrogate!r}")
        if not self.noise_sd > 0:
            raise ConfigurationError("model noise level must be positive")


@dataclass(frozen=True)
class ExperimentConfig:
    """A complete, serializable description of one replicated experiment."""

    objective: ObjectiveSpec
    strategy: StrategyConfig
    model: ModelConfig
    rounds: int
    batch_size: int
    replications: int
    master_seed: int = 0
    out_dir: str | None = None

    def __post_init__(self):
        if min(self.rounds, self.batch_size, self.replications) < 1:
            raise ConfigurationError("rounds, batch size and replications must be >= 1")
        if self.strategy.batch_size != self.batch_size:
            raise ConfigurationError("strategy batch size must match the experiment's")

    # --- JSON codec; keys mirror the written configuration schema ---

    def to_dict(self) -> dict:
        s = self.strategy
        return {
            "objective": {
                "kind": self.objective.kind,
                "dimension": self.objective.dimension,
                "bounds": [list(b) for b in self.objective.bounds],
                "resolution": self.objective.resolution,
                "noise-sd": self.objective.noise_sd,
            },
            "strategy": {
                "strategy": s.strategy,
                "B": s.batch_size,
                "beta-schedule": {
                    "case": s.beta.case,
                    "dim": s.beta.dim,
                    "grad-a": s.beta.grad_a,
                    "grad-b": s.beta.grad_b,
                    "value": s.beta.value_fixed,
                },
                "lambda-schedule": {
                    "mode": s.lam.mode,
                    "lambda": s.lam.lam,
                    "T-init": s.lam.t_init,
                },
                "phe-a": s.phe_a,
                "mcmc-steps": s.mcmc_steps,
            },
            "model": {
                "kernel": {
                    "family": self.model.kernel.family,
                    "lengthscale": self.model.kernel.lengthscale,
                    "output-scale": self.model.kernel.output_scale,
                },
                "noise-sd": self.model.noise_sd,
                "surrogate": self.model.surrogate,
                "feature-nodes": self.model.feature_nodes,
            },
            "T": self.rounds,
            "B": self.batch_size,
            "replications": self.replications,
            "master-seed": self.master_seed,
            "output-dir": self.out_dir,
        }

    @staticmethod
    def from_dict(data: dict) -> "ExperimentConfig":
        obj = data["objective"]
        objective = ObjectiveSpec(
            kind=obj["kind"],
            dimension=obj["dimension"],
            bounds=tuple(tuple(b) for b in obj["bounds"]),
            resolution=obj["resolution"],
            noise_sd=obj.get("noise-sd", 0.01),
        )
        s = data["strategy"]
        beta = s.get("beta-schedule") or {}
        lam = s.get("lambda-schedule") or {}
        strategy = StrategyConfig(
            strategy=s["strategy"],
            batch_size=s.get("B", data["B"]),
            beta=BetaSchedule(
                case=beta.get("case", "finite-domain"),
                dim=beta.get("dim"),
                grad_a=beta.get("grad-a"),
                grad_b=beta.get("grad-b"),
                value_fixed=beta.get("value"),
            ),
            lam=LambdaSchedule(
                mode=lam.get("mode", "constant"),
                lam=lam.get("lambda", 1.0),
                t_init=lam.get("T-init", 0),
            ),
            phe_a=s.get("phe-a"),
            mcmc_steps=s.get("mcmc-steps"),
        )
        m = data["model"]
        model = ModelConfig(
            kernel=KernelSpec(
                lengthscale=m["kernel"]["lengthscale"],
                output_scale=m["kernel"].get("output-scale", 1.0),
                family=m["kernel"].get("family", "squared-exponential"),
            ),
            noise_sd=m.get("noise-sd", 0.01),
            surrogate=m.get("surrogate", "exact"),
            feature_nodes=m.get("feature-nodes"),
        )
        return ExperimentConfig(
            objective=objective,
            strategy=strategy,
            model=model,
            rounds=data["T"],
            batch_size=data["B"],
            replications=data["replications"],
            master_seed=data.get("master-seed", 0),
            out_dir=data.get("output-dir"),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"

    @staticmethod
    def from_json(text: str) -> "ExperimentConfig":
        return ExperimentConfig.from_dict(json.loads(text))


@dataclass(frozen=True)
class RunRow:
    """One evaluation: (round, slot, point) plus the regret state after it."""

    t: int
    b: int
    index: int
    x: tuple[float, ...]
    y: float
    inst_regret: float
    batch_min_regret: float
    simple_regret: float
    cum_regret: float
    bbcr: float


@dataclass(frozen=True)
class RunRecord:
    """Full evaluation log of one replication; ``failed_round`` marks aborts."""

    run_id: int
    rows: tuple[RunRow, ...]
    failed_round: int | None = None


@dataclass(frozen=True)
class AggregateStats:
    """Per-round mean and standard error across successful replications."""

    rounds: tuple[int, ...]
    mean_simple: tuple[float, ...]
    se_simple: tuple[float, ...]
    mean_cum: tuple[float, ...]
    se_cum: tuple[float, ...]
    n_runs: int
    label: str = ""


def _stream(master_seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=key))


def _needs_feature_model(config: ExperimentConfig) -> bool:
    return config.model.surrogate == "feature" or config.strategy.strategy in (
        "phe",
        "dpp-phe",
    )


def run_replication(config: ExperimentConfig, rep: int) -> RunRecord:
    """Execute one seeded replication of the experiment loop."""
    grid = config.objective.make_grid()
    kernel = config.model.kernel
    noise_var = config.model.noise_sd**2
    truth = GroundTruth.build(
        config.objective, grid, kernel=kernel, rng=_stream(config.master_seed, rep, 0)
    )
    model = (
        FeatureModel.build(grid, kernel, noise_var, config.model.feature_nodes)
        if _needs_feature_model(config)
        else None
    )
    posterior = GaussianPosterior.prior(grid, kernel, noise_var)
    history = History.empty()
    trace = RegretTrace.empty()
    rows: list[RunRow] = []
    for t in range(1, config.rounds + 1):
        try:
            strategy_posterior = posterior
            if config.model.surrogate == "feature" and config.strategy.strategy not in (
                "phe",
                "dpp-phe",
            ):
                strategy_posterior = model.induced_posterior(history)
            batch = propose_batch(
                config.strategy,
                t,
                _stream(config.master_seed, rep, 1, t),
                posterior=strategy_posterior,
                model=model,
                history=history,
            )
            observations = [
                Observation(
                    idx,
                    observe(
                        truth,
                        idx,
                        config.objective.noise_sd,
                        _stream(config.master_seed, rep, 2, t, b),
                    ),
                )
                for b, idx in enumerate(batch)
            ]
            history = history.append_round(observations)
            if config.model.surrogate == "exact":
                posterior = gp_condition_checked(posterior, observations, t)
            trace = update_regret(trace, truth, batch)
        except NumericalError:
            return RunRecord(rep, tuple(rows), failed_round=t)
        base = (t - 1) * config.batch_size
        for b, obs in enumerate(observations):
            rows.append(
                RunRow(
                    t=t,
                    b=b,
                    index=obs.index,
                    x=tuple(float(c) for c in grid.points[obs.index]),
                    y=obs.y,
                    inst_regret=float(trace.inst[base + b]),
                    batch_min_regret=float(trace.batch_min[t - 1]),
                    simple_regret=float(trace.simple[base + b]),
                    cum_regret=float(trace.cumulative[base + b]),
                    bbcr=float(trace.bbcr[t - 1]),
                )
            )
    return RunRecord(rep, tuple(rows))


def gp_condition_checked(posterior, observations, round_index):
    """Conditioning wrapper that stamps the failing round onto numerical errors."""
    from .gp import gp_condition

    try:
        return gp_condition(posterior, observations)
    except NumericalError as exc:
        raise NumericalError(str(exc), round_index=round_index) from exc


def run_experiment(config: ExperimentConfig, parallel: int = 1) -> list[RunRecord]:
    """All replications, optionally across processes; output is order-stable."""
    reps = range(config.replications)
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            records = list(pool.map(run_replication, [config] * config.replications, reps))
    else:
        records = [run_replication(config, rep) for rep in reps]
    return records


def aggregate(records: list[RunRecord], label: str = "") -> AggregateStats:
    """Round-wise mean/SE of simple and cumulative regret over successful runs."""
    good = [r for r in records if r.failed_round is None and r.rows]
    if not good:
        return AggregateStats((), (), (), (), (), 0, label)
    rounds = max(row.t for row in good[0].rows)
    simple = np.empty((len(good), rounds))
    cum = np.empty((len(good), rounds))
    for i, rec in enumerate(good):
        for row in rec.rows:
            simple[i, row.t - 1] = row.simple_regret
            cum[i, row.t - 1] = row.cum_regret
    n = len(good)
    if n > 1:
        se_simple = simple.std(axis=0, ddof=1) / np.sqrt(n)
        se_cum = cum.std(axis=0, ddof=1) / np.sqrt(n)
    else:
        se_simple = np.zeros(rounds)
        se_cum = np.zeros(rounds)
    return AggregateStats(
        rounds=tuple(range(1, rounds + 1)),
        mean_simple=tuple(float(v) for v in simple.mean(axis=0)),
        se_simple=tuple(float(v) for v in se_simple),
        mean_cum=tuple(float(v) for v in cum.mean(axis=0)),
        se_cum=tuple(float(v) for v in se_cum),
        n_runs=n,
        label=label,
    )


def _format(value) -> str:
    return repr(value) if isinstance(value, float) else str(value)


def write_runs_csv(records: list[RunRecord], path, dimension: int | None = None) -> None:
    """Full evaluation log, one row per (run, round, slot)."""
    if dimension is None:
        dimension = len(records[0].rows[0].x) if records and records[0].rows else 0
    header = (
        list(RUN_CSV_FIXED_COLUMNS)
        + [f"x{i}" for i in range(dimension)]
        + list(RUN_CSV_TAIL_COLUMNS)
    )
    lines = [",".join(header)]
    for rec in records:
        for row in rec.rows:
            cells = [
                str(rec.run_id),
                str(row.t),
                str(row.b),
                str(row.index),
                *[_format(c) for c in row.x],
                _format(row.y),
                _format(row.inst_regret),
                _format(row.batch_min_regret),
                _format(row.simple_regret),
                _format(row.cum_regret),
                _format(row.bbcr),
            ]
            lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")


def read_runs_csv(path) -> list[RunRecord]:
    """Parse a run CSV back into records (grouped by run id, order preserved)."""
    lines = Path(path).read_text().splitlines()
    header = lines[0].split(",")
    dim = sum(1 for h in header if h.startswith("x") and h[1:].isdigit())
    by_run: dict[int, list[RunRow]] = {}
    order: list[int] = []
    for line in lines[1:]:
        cells = line.split(",")
        run_id = int(cells[0])
        x = tuple(float(c) for c in cells[4 : 4 + dim])
        tail = cells[4 + dim :]
        row = RunRow(
            t=int(cells[1]),
            b=int(cells[2]),
            index=int(cells[3]),
            x=x,
            y=float(tail[0]),
            inst_regret=float(tail[1]),
            batch_min_regret=float(tail[2]),
            simple_regret=float(tail[3]),
            cum_regret=float(tail[4]),
            bbcr=float(tail[5]),
        )
        if run_id not in by_run:
            by_run[run_id] = []
            order.append(run_id)
        by_run[run_id].append(row)
    return [RunRecord(rid, tuple(by_run[rid])) for rid in order]


def write_aggregate_csv(stats: AggregateStats, path) -> None:
    lines = [",".join(AGGREGATE_CSV_COLUMNS)]
    for i, t in enumerate(stats.rounds):
        lines.append(
            ",".join(
                [
                    str(t),
                    _format(stats.mean_simple[i]),
                    _format(stats.se_simple[i]),
                    _format(stats.mean_cum[i]),
                    _format(stats.se_cum[i]),
                    str(stats.n_runs),
                ]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


def read_aggregate_csv(path, label: str = "") -> AggregateStats:
    lines = Path(path).read_text().splitlines()
    rows = [line.split(",") for line in lines[1:]]
    return AggregateStats(
        rounds=tuple(int(r[0]) for r in rows),
        mean_simple=tuple(float(r[1]) for r in rows),
        se_simple=tuple(float(r[2]) for r in rows),
        mean_cum=tuple(float(r[3]) for r in rows),
        se_cum=tuple(float(r[4]) for r in rows),
        n_runs=int(rows[0][5]) if rows else 0,
        label=label,
    )
