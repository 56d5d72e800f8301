"""Trace-driven evaluation of online adaptation methods under temporal
pressure.

The package evaluates recorded (or live) per-batch latency/accuracy streams
under three service protocols: discrete asynchronous arrivals with hard
eviction, a continuous greedy consumer with hyperbolically decaying
responsiveness, and a finite adaptation budget amortised over the stream.
On top of the per-trace utilities sit ranking, rank-correlation, winner and
insolvency analyses across methods, pressure levels and corruptions.
"""

__version__ = "0.1.0"

from .trace import (
    AccuracyCurve,
    BatchRecord,
    FrozenRun,
    MethodTrace,
    PRESETS,
    SynthProfile,
    TraceBundle,
    TraceError,
    accuracy_mean,
    estimate_lambda,
    gen_frozen_run,
    gen_synthetic,
    load_frozen_run,
    load_trace,
    ms_to_ns,
    ns_to_ms_text,
    with_accuracy,
    write_frozen_run,
    write_trace,
)
from .discrete import (
    VARIANT_BUFFERED,
    VARIANT_STRICT,
    DiscreteConfig,
    DiscreteReport,
    Schedule,
    ScheduleEvent,
    discrete_utility,
    simulate,
    utilisation_to_gamma,
)
from .continuous import (
    BatchTiming,
    ContinuousConfig,
    ContinuousReport,
    continuous_utility,
    decay,
    wait_times,
)
from .amortised import (
    AmortisedConfig,
    AmortisedError,
    AmortisedReport,
    ParetoPoint,
    amortised_utility,
    cutoff,
    frontier_to_csv,
    overheads,
    pareto_frontier,
)
from .analysis import (
    InsolvencyResult,
    RankVector,
    Scenario,
    UtilityMatrix,
    WinStats,
    WinnerCell,
    insolvency_threshold,
    rank,
    spearman,
    spearman_scores,
    win_stats,
    winner_table_markdown,
    winners,
)
from .oracle import OracleConfig, oracle_cutoff, oracle_discrete
from .sweep import SweepSpec, load_bundles, run_analysis, run_sweep
from .provider import (
    BatchProvider,
    ExternalProvider,
    FrozenUnavailable,
    ProviderError,
    ProviderInfo,
    ProviderStep,
    ReplayProvider,
    run_amortised,
    run_continuous,
    run_discrete,
    run_offline,
)

__all__ = [name for name in dir() if not name.startswith("_")]
