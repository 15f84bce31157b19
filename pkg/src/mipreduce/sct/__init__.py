"""Therapy supply-chain model: parameters, demand profiles and the MILP builder."""
from .config import (
    FEATURE_DAYS, ConfigError, DemandProfile, Facility, SupplyChainConfig, TransportMode,
    builtin_config,
)
from .model import (
    BuiltModel, HorizonOverflow, ModelStats, SolutionInconsistency, SupplyChainSolution,
    build_model, established_vector, extract_solution, model_stats,
)
