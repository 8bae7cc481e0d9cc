"""Coverage analysis of 2-user uplink NOMA under stochastic geometry."""
from .config import Engine, ExperimentSpec, parse_config
from .coverage import (
    CoverageEstimate,
    LaplaceVariant,
    RankingScheme,
    UserRole,
    conditional_coverage,
    conditional_coverages,
    coverage,
    coverage_table,
)
from .laplace import LaplaceEvaluator, LaplaceKind, QuadratureError
from .simulation import (
    NetworkRealization,
    SimConfig,
    estimate_coverage,
    estimate_ordering_probability,
    evaluate_events,
    fading_oracle,
    sample_network,
    simulate,
)
from .spatial import ConfigError, ModelConfig, ModelKind, OrderedDistancePair, SirThreshold
from .sweep import run_sweep
from .validate import run_validate

__all__ = [
    "ConfigError", "CoverageEstimate", "Engine", "ExperimentSpec", "LaplaceEvaluator",
    "LaplaceKind", "LaplaceVariant", "ModelConfig", "ModelKind", "NetworkRealization",
    "OrderedDistancePair", "QuadratureError", "RankingScheme", "SimConfig", "SirThreshold",
    "UserRole", "conditional_coverage", "conditional_coverages", "coverage", "coverage_table",
    "estimate_coverage", "estimate_ordering_probability", "evaluate_events", "fading_oracle",
    "parse_config", "run_sweep", "run_validate", "sample_network", "simulate",
]
