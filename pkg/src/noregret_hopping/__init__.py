"""noregret_hopping package: decentralized no-regret time-frequency scheduling for FMCW radars."""

from .analysis import EquilibriumCertificate, PlayHistory, certify, collision_rate, empirical_distribution
from .config import ScenarioValidationError, load_scenario, scenario_from_mapping
from .harness import ExperimentError, ExperimentSpec, export_rd_cube, load_experiment_spec, run_experiment, run_sweep
from .learning import (
    ExternalRegretLearner,
    FixedStrategyLearner,
    InternalRegretLearner,
    StationaryDistributionError,
    build_learner,
)
from .model import (
    ActionSpace,
    InterferenceGraph,
    JointAction,
    MixedStrategy,
    RadarParams,
    Scenario,
    ScenarioError,
    Target,
)
from .params import LearnerParams, LearnerParamsValidationError, LearnerParamsValidator
from .runtime import RunReport, SimulationRuntime
from .tracing import ConsoleTracer, SQLiteTracer

__all__ = [
    "ActionSpace",
    "JointAction",
    "RadarParams",
    "Target",
    "InterferenceGraph",
    "MixedStrategy",
    "Scenario",
    "ScenarioError",
    "ScenarioValidationError",
    "load_scenario",
    "scenario_from_mapping",
    "LearnerParams",
    "LearnerParamsValidator",
    "LearnerParamsValidationError",
    "FixedStrategyLearner",
    "ExternalRegretLearner",
    "InternalRegretLearner",
    "StationaryDistributionError",
    "build_learner",
    "PlayHistory",
    "EquilibriumCertificate",
    "certify",
    "collision_rate",
    "empirical_distribution",
    "ExperimentSpec",
    "ExperimentError",
    "load_experiment_spec",
    "run_experiment",
    "run_sweep",
    "export_rd_cube",
    "SimulationRuntime",
    "RunReport",
    "ConsoleTracer",
    "SQLiteTracer",
]
