"""Shared helpers: errors and logging."""

from .errors import (
    RetrialError,
    ConfigError,
    ValidationError,
    IrreducibilityError,
    UndefinedMeasureError,
    SimulationError,
    ConvergenceError,
    TruncationError,
    SingularBlockError,
    ResidualError,
    DimensionCapError,
    InfeasibleError,
)
from .logging_utils import setup_logging

__all__ = [
    "RetrialError",
    "ConfigError",
    "ValidationError",
    "IrreducibilityError",
    "UndefinedMeasureError",
    "SimulationError",
    "ConvergenceError",
    "TruncationError",
    "SingularBlockError",
    "ResidualError",
    "DimensionCapError",
    "InfeasibleError",
    "setup_logging",
]
