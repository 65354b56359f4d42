"""Constraint evaluation shared by the search agents."""

import logging
import math
import threading
from typing import Dict, Optional, Tuple

from src.models.optimization import OptimizationProblem, OptimizationResult
from src.models.stochastic import CallClass, ModelConfig
from src.tools.measure_tools import dropping_probability, preemption_probability
from src.tools.solver_tools import solve
from src.utils.errors import RetrialError, ValidationError

logger = logging.getLogger(__name__)


class ConstraintEvaluator:
    """Memoized (S, lambda_H) -> (P_d, P_preempt) for one problem.

    The memo key is (S, lambda_H rounded to the problem quantum); the solve
    itself runs at the rounded rate so cached and fresh values coincide.
    """

    def __init__(self, problem: OptimizationProblem):
        self.problem = problem
        self._memo: Dict[Tuple[int, int], Tuple[float, float]] = {}
        self._lock = threading.Lock()
        self.calls = 0
        self.evaluations = 0

    def quantize(self, lambda_h: float) -> float:
        q = self.problem.quantum
        return round(lambda_h / q) * q

    def _key(self, S: int, lambda_h: float) -> Tuple[int, int]:
        return int(S), int(round(lambda_h / self.problem.quantum))

    def config_at(self, S: int, lambda_h: float) -> ModelConfig:
        base = self.problem.base
        return base.replace(S=int(S), mmap=base.mmap.with_class_rate(CallClass.HANDOFF, lambda_h))

    def _solve(self, S: int, lambda_h: float) -> Tuple[float, float]:
        if lambda_h <= 0:
            return 0.0, 0.0
        cfg = self.config_at(S, lambda_h)
        try:
            ss, _ = solve(cfg)
            return dropping_probability(ss, cfg), preemption_probability(ss, cfg)
        except RetrialError as exc:
            exc.context.update(S=int(S), lambda_h=lambda_h)
            logger.error("evaluation failed at S=%d, lambda_H=%.4f: %s", S, lambda_h, exc)
            raise

    def __call__(self, S: int, lambda_h: float, use_cache: bool = True) -> Tuple[float, float]:
        lambda_h = self.quantize(lambda_h)
        key = self._key(S, lambda_h)
        with self._lock:
            self.calls += 1
            if use_cache and key in self._memo:
                return self._memo[key]
        value = self._solve(S, lambda_h)
        with self._lock:
            self.evaluations += 1
            self._memo.setdefault(key, value)
        return value

    def objective(self, S: int, lambda_h: float) -> Tuple[float, float, float]:
        """(F, P_d, P_preempt) at the rounded point."""
        lambda_h = self.quantize(lambda_h)
        p_d, p_pre = self(S, lambda_h)
        return self.problem.objective(S, lambda_h, p_d, p_pre), p_d, p_pre

    def verify(self, result: OptimizationResult) -> OptimizationResult:
        """Re-solve at the reported point without the memo and refresh the feasibility flag."""
        if result.S is None or result.lambda_h is None:
            result.feasible = False
            return result
        p_d, p_pre = self(result.S, result.lambda_h, use_cache=False)
        result.P_d, result.P_preempt = p_d, p_pre
        result.feasible = result.feasible and self.problem.feasible(p_d, p_pre)
        result.evaluations = self.evaluations
        return result


def evaluate(problem: OptimizationProblem, S: int, lambda_h: float,
             evaluator: Optional[ConstraintEvaluator] = None) -> Tuple[float, float]:
    """(P_d, P_preempt) at (S, lambda_H)."""
    if S < 1 or S > problem.s_max or lambda_h < 0 or lambda_h > problem.lambda_max:
        raise ValidationError(f"point (S={S}, lambda_H={lambda_h}) outside the search box")
    return (evaluator or ConstraintEvaluator(problem))(S, lambda_h)


def channels_from_position(position: float, problem: OptimizationProblem) -> int:
    """Continuous S coordinate to an admissible channel count (rounded up)."""
    return int(min(max(math.ceil(position - 1e-12), problem.s_min), problem.s_max))


__all__ = ["ConstraintEvaluator", "evaluate", "channels_from_position"]
