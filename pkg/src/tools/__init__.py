"""Numeric building blocks for the retrial system."""

from .decorators import MEASURE_REGISTRY, describe_measures, measure
from .generator_tools import GeneratorBuilder, assemble_truncated
from .solver_tools import choose_truncation, direct_solve, solve, solve_steady_state
from .measure_tools import compute_measures
from .simulation_tools import simulate, trend_sweep

__all__ = [
    "measure",
    "MEASURE_REGISTRY",
    "describe_measures",
    "GeneratorBuilder",
    "assemble_truncated",
    "solve",
    "solve_steady_state",
    "direct_solve",
    "choose_truncation",
    "compute_measures",
    "simulate",
    "trend_sweep",
]
