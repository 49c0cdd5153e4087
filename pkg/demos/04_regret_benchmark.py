"""Small replicated regret comparison with CSV and SVG output.

A scaled-down version of the acceptance benchmark: objectives sampled from a
squared-exponential prior, three strategies, common ground truths per
replication, aggregate curves written next to this script.
"""

from pathlib import Path

import numpy as np

from dppbatch import (
    ExperimentConfig,
    KernelSpec,
    LambdaSchedule,
    ModelConfig,
    ObjectiveSpec,
    StrategyConfig,
    aggregate,
    emit_plot,
    run_experiment,
    write_aggregate_csv,
)

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)


def config(strategy: str) -> ExperimentConfig:
    return ExperimentConfig(
        objective=ObjectiveSpec("gp-sample", 1, ((0.0, 1.0),), 128, noise_sd=0.01),
        strategy=StrategyConfig(
            strategy=strategy, batch_size=5, lam=LambdaSchedule("constant", 1.0)
        ),
        model=ModelConfig(kernel=KernelSpec(lengthscale=np.sqrt(0.005)), noise_sd=0.01),
        rounds=12,
        batch_size=5,
        replications=8,
        master_seed=0,
    )


stats = []
for name in ("dpp-ts", "ts", "uniform"):
    records = run_experiment(config(name))
    agg = aggregate(records, label=name)
    stats.append(agg)
    write_aggregate_csv(agg, OUT / f"{name}.csv")
    print(
        f"{name:8s} final simple regret {agg.mean_simple[-1]:.5f} "
        f"(se {agg.se_simple[-1]:.5f}), cumulative {agg.mean_cum[-1]:.1f}"
    )

emit_plot(stats, OUT / "simple_regret.svg", metric="simple", log_y=True)
emit_plot(stats, OUT / "cumulative_regret.svg", metric="cumulative")
print(f"wrote {OUT / 'simple_regret.svg'} and {OUT / 'cumulative_regret.svg'}")
