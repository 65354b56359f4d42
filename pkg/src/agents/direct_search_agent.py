"""Direct Search Agent: grid scan over the handoff rate for increasing channel counts."""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Tuple

import numpy as np

from src.config import settings
from src.models.optimization import OptimizationProblem, OptimizationResult
from src.tools.optimization_tools import ConstraintEvaluator

logger = logging.getLogger(__name__)


class DirectSearchAgent:
    """
    Grid search for the smallest channel count with coincident constraint boundaries.

    For each S from the lower bound upwards, the agent scans the
    whole handoff-rate grid and records the largest grid point with P_d <= eps1
    and the largest one with P_preempt <= eps2. A measure that climbs above its
    tolerance and falls back under it still counts at the higher rate. The first
    S at which the two boundaries fall on the same grid point is returned with
    that rate.
    """

    method = "direct_search"

    def __init__(self, problem: OptimizationProblem, workers: int = settings.WORKERS,
                 evaluator: Optional[ConstraintEvaluator] = None):
        self.problem = problem
        self.workers = workers
        self.evaluator = evaluator or ConstraintEvaluator(problem)

    def grid(self) -> np.ndarray:
        p = self.problem
        count = int(np.floor(p.lambda_max / p.grid_step + 1e-9))
        points = np.arange(1, count + 1) * p.grid_step
        return points[points >= p.lambda_min - 1e-12]

    def _values(self, S: int, grid: np.ndarray) -> List[Tuple[float, float]]:
        if self.workers > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                return list(pool.map(lambda lam: self.evaluator(S, lam), grid))
        return [self.evaluator(S, lam) for lam in grid]

    def boundaries(self, S: int) -> Tuple[Optional[float], Optional[float], Dict[float, Tuple[float, float]]]:
        """(lambda^1, lambda^2, evaluated points): largest feasible grid rate per constraint, None if there is none."""
        grid = self.grid()
        values = self._values(S, grid)
        lam1 = lam2 = None
        for lam, (p_d, p_pre) in zip(grid, values):
            if p_d <= self.problem.eps1:
                lam1 = float(lam)
            if p_pre <= self.problem.eps2:
                lam2 = float(lam)
        return lam1, lam2, dict(zip(map(float, grid), values))

    def run(self) -> OptimizationResult:
        p = self.problem
        print(f"🔍 Direct search over S in [{p.s_min}, {p.s_max}], grid step {p.grid_step}")
        history = []
        tried = 0
        for S in range(p.s_min, p.s_max + 1):
            tried += 1
            lam1, lam2, points = self.boundaries(S)
            history.append({"S": S, "lambda_1": lam1, "lambda_2": lam2})
            logger.info("S=%d: P_d boundary %s, P_preempt boundary %s", S, lam1, lam2)
            if lam1 is None or lam2 is None:
                continue
            if abs(lam1 - lam2) <= 0.5 * p.grid_step:
                lam = min(lam1, lam2)
                p_d, p_pre = points[lam]
                print(f"   ✅ Boundaries coincide at S={S}, lambda_H={lam:g}")
                result = OptimizationResult(
                    method=self.method, S=S, lambda_h=lam, P_d=p_d, P_preempt=p_pre,
                    iterations=tried, evaluations=self.evaluator.evaluations, feasible=True,
                    objective=p.objective(S, lam, p_d, p_pre), history=history,
                )
                return self.evaluator.verify(result)
        print(f"   ⚠️ No coincident boundaries up to S={p.s_max}")
        return OptimizationResult(
            method=self.method, S=None, lambda_h=None, P_d=None, P_preempt=None,
            iterations=tried, evaluations=self.evaluator.evaluations, feasible=False, history=history,
        )


def direct_search(problem: OptimizationProblem, workers: int = settings.WORKERS) -> OptimizationResult:
    return DirectSearchAgent(problem, workers).run()
