"""Command-line front end: run experiments, plot curves, audit the samplers."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import ConfigurationError
from .harness import (
    ExperimentConfig,
    aggregate,
    read_aggregate_csv,
    run_experiment,
    write_aggregate_csv,
    write_runs_csv,
)
from .oracles import run_suite
from .plotting import emit_plot


def _cmd_run(args) -> int:
    config = ExperimentConfig.from_json(Path(args.config).read_text())
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.out is not None:
        overrides["out_dir"] = args.out
    if overrides:
        data = config.to_dict()
        if "master_seed" in overrides:
            data["master-seed"] = overrides["master_seed"]
        if "out_dir" in overrides:
            data["output-dir"] = overrides["out_dir"]
        config = ExperimentConfig.from_dict(data)
    if config.out_dir is None:
        raise ConfigurationError("no output directory: set output-dir or pass --out")
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    records = run_experiment(config, parallel=args.parallel)
    stats = aggregate(records, label=config.strategy.strategy)
    (out / "config.json").write_text(config.to_json())
    write_runs_csv(records, out / "runs.csv", dimension=config.objective.dimension)
    write_aggregate_csv(stats, out / "aggregate.csv")

    failed = [r for r in records if r.failed_round is not None]
    print(f"{config.strategy.strategy}: {stats.n_runs} runs ok, {len(failed)} failed")
    for rec in failed:
        print(f"  run {rec.run_id} failed in round {rec.failed_round}")
    if stats.rounds:
        print(
            f"final simple regret {stats.mean_simple[-1]:.6g} "
            f"(se {stats.se_simple[-1]:.3g}), "
            f"final cumulative regret {stats.mean_cum[-1]:.6g} "
            f"(se {stats.se_cum[-1]:.3g})"
        )
    print(f"wrote {out / 'runs.csv'} and {out / 'aggregate.csv'}")
    return 0


def _find_aggregates(root: Path) -> list[tuple[str, Path]]:
    found = []
    if (root / "aggregate.csv").exists():
        found.append((root.name, root / "aggregate.csv"))
    for sub in sorted(p for p in root.iterdir() if p.is_dir()):
        agg = sub / "aggregate.csv"
        if agg.exists():
            found.append((sub.name, agg))
    return found


def _cmd_plot(args) -> int:
    root = Path(args.input)
    found = _find_aggregates(root)
    if not found:
        raise ConfigurationError(f"no aggregate.csv found under {root}")
    stats = [read_aggregate_csv(path, label=label) for label, path in found]
    emit_plot(stats, args.out, metric=args.metric, log_y=args.log_y)
    print(f"wrote {args.out} ({len(stats)} series)")
    return 0


def _cmd_oracle_check(args) -> int:
    results = run_suite(args.suite)
    ok = True
    for res in results:
        status = "PASS" if res.passed else "FAIL"
        print(f"{status} {res.name}: {res.detail}")
        ok = ok and res.passed
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dppbatch",
        description="Batched Bayesian optimization with DPP batch diversification",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute a replicated experiment from a config")
    run_p.add_argument("--config", required=True, help="path to a JSON experiment config")
    run_p.add_argument("--seed", type=int, default=None, help="override the master seed")
    run_p.add_argument("--out", default=None, help="override the output directory")
    run_p.add_argument("--parallel", type=int, default=1, help="worker processes")
    run_p.set_defaults(fn=_cmd_run)

    plot_p = sub.add_parser("plot", help="render regret curves from aggregate CSVs")
    plot_p.add_argument("--in", dest="input", required=True, help="experiment directory")
    plot_p.add_argument("--out", required=True, help="output SVG path")
    plot_p.add_argument("--log-y", action="store_true", help="log-scale the regret axis")
    plot_p.add_argument(
        "--metric", choices=("simple", "cumulative"), default="simple"
    )
    plot_p.set_defaults(fn=_cmd_plot)

    oracle_p = sub.add_parser("oracle-check", help="run enumeration-backed sampler audits")
    oracle_p.add_argument(
        "--suite",
        required=True,
        help="one of: mcmc-stationarity, detailed-balance, reweighting, "
        "sequential-logdet, marginal-variance, all",
    )
    oracle_p.set_defaults(fn=_cmd_oracle_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
