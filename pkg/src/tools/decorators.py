"""Measure decorator for registering stationary performance measures."""

import functools
from dataclasses import dataclass
from typing import Callable, Dict, Optional


@dataclass(frozen=True)
class RegisteredMeasure:
    name: str
    description: str
    func: Callable
    kind: str = "probability"

    def __call__(self, *args, **kwargs):
        return self.func(*args, **kwargs)


MEASURE_REGISTRY: Dict[str, RegisteredMeasure] = {}


def measure(name: Optional[str] = None, description: Optional[str] = None, kind: str = "probability"):
    """
    Decorator to register a function as a named performance measure.

    Args:
        name: Measure name (defaults to function name)
        description: Measure description (defaults to function docstring)
        kind: "probability", "rate" or "count"; probabilities are range-checked

    Returns:
        The wrapped function, also reachable through MEASURE_REGISTRY
    """
    def decorator(func: Callable) -> Callable:
        measure_name = name or func.__name__
        measure_description = description or (func.__doc__ or "").strip() or f"Measure: {measure_name}"

        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            value = func(*args, **kwargs)
            if kind == "probability":
                return min(max(value, 0.0), 1.0) if -1e-9 <= value <= 1.0 + 1e-9 else value
            if kind in ("rate", "count"):
                return max(value, 0.0) if value >= -1e-9 else value
            return value

        MEASURE_REGISTRY[measure_name] = RegisteredMeasure(measure_name, measure_description, wrapper, kind)
        wrapper.measure_name = measure_name
        return wrapper

    return decorator


def describe_measures() -> Dict[str, str]:
    """Name -> description for every registered measure."""
    return {name: entry.description for name, entry in MEASURE_REGISTRY.items()}
