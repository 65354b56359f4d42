"""Channel-allocation problem and optimiser results."""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Optional

from src.models.stochastic import ModelConfig
from src.utils.errors import ValidationError


class LambdaObjective(Enum):
    """How the handoff rate enters the penalised objective.

    MAX rewards larger handoff rates at equal S (the boundary reading of the
    grid search); FREE leaves the handoff rate unconstrained by the objective.
    """

    MAX = "max"
    FREE = "free"


@dataclass(frozen=True, eq=False)
class OptimizationProblem:
    """min S subject to P_d <= eps1 and P_preempt <= eps2 over (S, lambda_H)."""

    base: ModelConfig
    eps1: float = 1e-4
    eps2: float = 1e-4
    s_min: int = 2
    s_max: int = 10
    lambda_min: float = 0.01
    lambda_max: float = 2.0
    grid_step: float = 0.025
    penalty: float = 1e8
    lambda_objective: LambdaObjective = LambdaObjective.MAX
    quantum: float = 1e-3

    def __post_init__(self):
        if not (0 < self.eps1 <= 1 and 0 < self.eps2 <= 1):
            raise ValidationError(f"tolerances must lie in (0, 1], got {self.eps1}, {self.eps2}")
        if not 1 <= self.s_min <= self.s_max:
            raise ValidationError(f"empty channel range [{self.s_min}, {self.s_max}]")
        if not 0 < self.lambda_min <= self.lambda_max:
            raise ValidationError(f"empty handoff-rate range ({self.lambda_min}, {self.lambda_max}]")
        if self.grid_step <= 0:
            raise ValidationError(f"grid step must be positive, got {self.grid_step}")
        if self.penalty <= 0:
            raise ValidationError(f"penalty coefficient must be positive, got {self.penalty}")

    def feasible(self, p_d: float, p_preempt: float) -> bool:
        return p_d <= self.eps1 and p_preempt <= self.eps2

    def penalty_term(self, p_d: float, p_preempt: float) -> float:
        return self.penalty * (max(0.0, p_d - self.eps1) ** 2 + max(0.0, p_preempt - self.eps2) ** 2)

    def objective(self, S: int, lambda_h: float, p_d: float, p_preempt: float) -> float:
        value = float(S) + self.penalty_term(p_d, p_preempt)
        if self.lambda_objective is LambdaObjective.MAX:
            value -= 0.5 * lambda_h / self.lambda_max
        return value

    def to_dict(self) -> Dict[str, Any]:
        return {
            "config": self.base.name,
            "eps1": self.eps1,
            "eps2": self.eps2,
            "s_min": self.s_min,
            "s_max": self.s_max,
            "lambda_min": self.lambda_min,
            "lambda_max": self.lambda_max,
            "grid_step": self.grid_step,
            "penalty": self.penalty,
            "lambda_objective": self.lambda_objective.value,
        }


@dataclass
class OptimizationResult:
    method: str
    S: Optional[int]
    lambda_h: Optional[float]
    P_d: Optional[float]
    P_preempt: Optional[float]
    iterations: int
    evaluations: int
    feasible: bool
    objective: Optional[float] = None
    history: list = field(default_factory=list, repr=False)

    def row(self, **extra: Any) -> Dict[str, Any]:
        """Flat row in table column order: extras first, then S*, lambda_H*, P_d*, P_preempt*, iterations."""
        return {
            **extra,
            "S": self.S,
            "lambda_h": self.lambda_h,
            "P_d": self.P_d,
            "P_preempt": self.P_preempt,
            "iterations": self.iterations,
            "evaluations": self.evaluations,
            "method": self.method,
            "feasible": self.feasible,
        }
