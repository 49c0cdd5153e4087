"""Batched Bayesian optimization with determinantal batch diversification.

The package is organized in layers:

- :mod:`dppbatch.gp` — grids, kernels, exact GP conditioning, path sampling;
- :mod:`dppbatch.features` — quadrature Fourier-feature surrogate;
- :mod:`dppbatch.dpp` — L-ensembles, enumeration oracles, MCMC samplers;
- :mod:`dppbatch.strategies` — batch proposal rules;
- :mod:`dppbatch.benchmarks` — objectives, noise model, regret accounting;
- :mod:`dppbatch.harness` — replicated experiments, aggregation, CSV;
- :mod:`dppbatch.plotting` — deterministic SVG charts;
- :mod:`dppbatch.oracles` — enumeration-backed correctness audits;
- :mod:`dppbatch.cli` — ``run`` / ``plot`` / ``oracle-check`` commands.
"""

from .benchmarks import (
    GroundTruth,
    ObjectiveSpec,
    RegretTrace,
    eval_objective,
    greedy_info_gain,
    info_gain,
    observe,
    sample_gp_objective,
    update_regret,
)
from .dpp import (
    Batch,
    LEnsemble,
    PmaxEstimate,
    build_reweighted_lensemble,
    default_chain_steps,
    detailed_balance_check,
    empirical_distribution,
    estimate_pmax,
    exact_batch_distribution,
    mcmc_full_batch,
    mcmc_gibbs,
    mcmc_single_swap,
    mutual_information_ensemble,
    restricted_det,
    restricted_logdet,
    sample_dpp_batches,
    tv_distance,
)
from .errors import ConfigurationError, NumericalError
from .features import FeatureModel, ff_fit_and_sample, phe_draws
from .gp import (
    DomainGrid,
    GaussianPosterior,
    History,
    KernelSpec,
    Observation,
    gp_condition,
    gp_sample_path,
    gram_matrix,
    hallucinate,
    kernel_eval,
    sample_paths,
    thompson_draw,
    thompson_draws,
)
from .harness import (
    AggregateStats,
    ExperimentConfig,
    ModelConfig,
    RunRecord,
    RunRow,
    aggregate,
    read_aggregate_csv,
    read_runs_csv,
    run_experiment,
    run_replication,
    write_aggregate_csv,
    write_runs_csv,
)
from .plotting import emit_plot
from .strategies import (
    BetaSchedule,
    LambdaSchedule,
    StrategyConfig,
    beta_schedule,
    plausible_maximizer_region,
    propose_batch,
    propose_dpp_phe,
    propose_dpp_ts,
    propose_dpp_ts_alt,
    propose_gp_bucb,
    propose_hal_ts,
    propose_phe,
    propose_pure_dpp,
    propose_ts,
    propose_ucb_dpp_sample,
    propose_ucb_pe,
    propose_uniform,
)

__version__ = "0.1.0"
