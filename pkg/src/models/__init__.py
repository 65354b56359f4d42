"""Models package for the retrial system's domain types."""

from .stochastic import (
    CallClass,
    MarkedMAP,
    Mode,
    ModelConfig,
    PhaseType,
    RetrialPH,
    TruncationPolicy,
    Violation,
)
from .state import LevelLayout, StateCoord
from .results import LevelBlocks, MeasureReport, SimEstimate, SteadyState
from .optimization import LambdaObjective, OptimizationProblem, OptimizationResult
from .manifest import RunManifest

__all__ = [
    "CallClass",
    "MarkedMAP",
    "Mode",
    "ModelConfig",
    "PhaseType",
    "RetrialPH",
    "TruncationPolicy",
    "Violation",
    "LevelLayout",
    "StateCoord",
    "LevelBlocks",
    "MeasureReport",
    "SimEstimate",
    "SteadyState",
    "LambdaObjective",
    "OptimizationProblem",
    "OptimizationResult",
    "RunManifest",
]
