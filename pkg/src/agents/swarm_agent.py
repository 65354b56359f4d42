"""Particle Swarm Agent for the penalised channel-allocation objective."""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from src.config import settings
from src.models.optimization import OptimizationProblem, OptimizationResult
from src.tools.optimization_tools import ConstraintEvaluator, channels_from_position
from src.utils.errors import ValidationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SwarmSettings:
    swarm_size: int = 60
    w_max: float = 0.9
    w_min: float = 0.4
    c1: float = 2.0
    c2: float = 2.0
    maxite: int = 200
    patience: int = 100
    tol: float = 1e-6

    def __post_init__(self):
        if self.swarm_size < 2:
            raise ValidationError(f"swarm size must be >= 2, got {self.swarm_size}")
        if self.maxite < 1:
            raise ValidationError(f"maxite must be >= 1, got {self.maxite}")
        if not 0 <= self.w_min <= self.w_max:
            raise ValidationError(f"inertia bounds must satisfy 0 <= w_min <= w_max, got {self.w_min}, {self.w_max}")
        if self.c1 < 0 or self.c2 < 0:
            raise ValidationError("acceleration factors must be nonnegative")
        if self.patience < 1:
            raise ValidationError(f"patience must be >= 1, got {self.patience}")


class SwarmAgent:
    """
    Particle swarm over the box (s_min - 1, s_max] x [lambda_min, lambda_max].

    The channel coordinate is continuous and rounded up before evaluation.
    Inertia decays linearly from w_max to w_min and velocities are clamped to
    half the box width. The best feasible point seen is returned; without one,
    the best penalised point is returned flagged infeasible.
    """

    method = "pso"

    def __init__(self, problem: OptimizationProblem, params: Optional[SwarmSettings] = None,
                 seed: int = 0, workers: int = settings.WORKERS,
                 evaluator: Optional[ConstraintEvaluator] = None):
        self.problem = problem
        self.params = params or SwarmSettings()
        self.seed = seed
        self.workers = workers
        self.evaluator = evaluator or ConstraintEvaluator(problem)
        self.lower = np.array([problem.s_min - 1 + 1e-9, problem.lambda_min])
        self.upper = np.array([float(problem.s_max), problem.lambda_max])
        self.v_max = 0.5 * (self.upper - self.lower)

    def _point(self, position: np.ndarray) -> Tuple[int, float]:
        return channels_from_position(position[0], self.problem), self.evaluator.quantize(position[1])

    def _fitness(self, position: np.ndarray) -> Tuple[float, float, float]:
        S, lam = self._point(position)
        return self.evaluator.objective(S, lam)

    def _evaluate(self, positions: np.ndarray) -> List[Tuple[float, float, float]]:
        if self.workers > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                return list(pool.map(self._fitness, positions))
        return [self._fitness(x) for x in positions]

    def run(self) -> OptimizationResult:
        p, cfg = self.problem, self.params
        rng = np.random.default_rng(self.seed)
        n = cfg.swarm_size
        print(f"🐝 PSO with {n} particles, maxite={cfg.maxite}, seed={self.seed}")
        x = self.lower + rng.random((n, 2)) * (self.upper - self.lower)
        v = (rng.random((n, 2)) * 2.0 - 1.0) * self.v_max
        values = self._evaluate(x)
        f = np.array([value[0] for value in values])
        personal, f_personal = x.copy(), f.copy()
        g = int(np.argmin(f_personal))
        best, f_best = personal[g].copy(), float(f_personal[g])
        feasible_best: Optional[Tuple[float, int, float, float, float]] = None
        feasible_best = self._track_feasible(x, values, feasible_best)
        history = [f_best]
        stale = 0
        iterations = 0
        for it in range(cfg.maxite):
            iterations = it + 1
            w = cfg.w_max - (cfg.w_max - cfg.w_min) * it / max(cfg.maxite - 1, 1)
            u1, u2 = rng.random((n, 2)), rng.random((n, 2))
            v = w * v + cfg.c1 * u1 * (personal - x) + cfg.c2 * u2 * (best - x)
            v = np.clip(v, -self.v_max, self.v_max)
            x = np.clip(x + v, self.lower, self.upper)
            values = self._evaluate(x)
            f = np.array([value[0] for value in values])
            improved = f < f_personal
            personal[improved], f_personal[improved] = x[improved], f[improved]
            feasible_best = self._track_feasible(x, values, feasible_best)
            g = int(np.argmin(f_personal))
            if f_best - f_personal[g] > cfg.tol:
                stale = 0
            else:
                stale += 1
            if f_personal[g] < f_best:
                best, f_best = personal[g].copy(), float(f_personal[g])
            history.append(f_best)
            if stale >= cfg.patience:
                logger.info("PSO stopped after %d iterations without improvement", stale)
                break
        return self._result(best, f_best, feasible_best, iterations, history)

    def _track_feasible(self, x: np.ndarray, values, current):
        for position, (value, p_d, p_pre) in zip(x, values):
            if self.problem.feasible(p_d, p_pre) and (current is None or value < current[0]):
                S, lam = self._point(position)
                current = (value, S, lam, p_d, p_pre)
        return current

    def _result(self, best: np.ndarray, f_best: float, feasible_best, iterations: int,
                history: list) -> OptimizationResult:
        if feasible_best is not None:
            value, S, lam, p_d, p_pre = feasible_best
            feasible = True
        else:
            S, lam = self._point(best)
            value, p_d, p_pre = self.evaluator.objective(S, lam)
            feasible = False
        print(f"   {'✅' if feasible else '⚠️'} S*={S}, lambda_H*={lam:g} after {iterations} iterations")
        result = OptimizationResult(
            method=self.method, S=S, lambda_h=lam, P_d=p_d, P_preempt=p_pre,
            iterations=iterations, evaluations=self.evaluator.evaluations, feasible=feasible,
            objective=value, history=history,
        )
        return self.evaluator.verify(result)


def pso(problem: OptimizationProblem, swarm_size: int = 60, w_max: float = 0.9, w_min: float = 0.4,
        c1: float = 2.0, c2: float = 2.0, maxite: int = 200, seed: int = 0, patience: int = 100,
        workers: int = settings.WORKERS) -> OptimizationResult:
    params = SwarmSettings(swarm_size, w_max, w_min, c1, c2, maxite, patience)
    return SwarmAgent(problem, params, seed, workers).run()
