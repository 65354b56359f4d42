"""Exception hierarchy shared by every layer; each class maps to a CLI exit code."""

from typing import Any, Dict, Optional


class RetrialError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1

    def __init__(self, message: str, **context: Any):
        super().__init__(message)
        self.context: Dict[str, Any] = context

    def to_dict(self) -> Dict[str, Any]:
        return {"error": type(self).__name__, "message": str(self), **self.context}


class ConfigError(RetrialError):
    """Configuration cannot be loaded, resolved or written."""

    exit_code = 2


class ValidationError(ConfigError):
    """A model ingredient violates one of its invariants."""

    def __init__(self, message: str, violations: Optional[list] = None, **context: Any):
        super().__init__(message, **context)
        self.violations = list(violations or [])


class IrreducibilityError(ConfigError):
    """A generator that must be irreducible is not."""

    def __init__(self, message: str, classes: Optional[list] = None, **context: Any):
        super().__init__(message, classes=classes, **context)
        self.classes = classes or []


class UndefinedMeasureError(ConfigError):
    """A measure is requested whose normalising rate is zero."""


class SimulationError(ConfigError):
    """Invalid simulation request or runaway event rates."""


class ConvergenceError(RetrialError):
    """A numerical procedure did not reach its target."""

    exit_code = 3


class TruncationError(ConvergenceError):
    """No truncation level up to the cap satisfied the stability test."""

    def __init__(self, message: str, m_cap: int, deltas: Optional[Dict[str, float]] = None,
                 tail_mass: Optional[float] = None):
        super().__init__(message, m_cap=m_cap, deltas=deltas, tail_mass=tail_mass)
        self.m_cap = m_cap
        self.deltas = deltas or {}
        self.tail_mass = tail_mass


class SingularBlockError(ConvergenceError):
    """The inner matrix of the backward recursion is singular at some level."""

    def __init__(self, message: str, level: int):
        super().__init__(message, level=level)
        self.level = level


class ResidualError(ConvergenceError):
    """A solver residual exceeded its tolerance."""


class DimensionCapError(RetrialError):
    """A block or product would exceed the configured size cap."""

    exit_code = 4

    def __init__(self, message: str, dimension: int, cap: int, level: Optional[int] = None):
        super().__init__(message, dimension=dimension, cap=cap, level=level)
        self.dimension = dimension
        self.cap = cap
        self.level = level


class InfeasibleError(RetrialError):
    """The optimiser found no point meeting both constraints."""

    exit_code = 5


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
]
