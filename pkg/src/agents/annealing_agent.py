"""Simulated Annealing Agent for the penalised channel-allocation objective."""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from src.models.optimization import OptimizationProblem, OptimizationResult
from src.tools.optimization_tools import ConstraintEvaluator
from src.utils.errors import ValidationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AnnealingSettings:
    cooling: float = 0.95
    epoch_length: int = 50
    step_scale: float = 0.1
    t0_samples: int = 20
    min_epochs: int = 20
    max_epochs: int = 400
    tol: float = 1e-6

    def __post_init__(self):
        if not 0 < self.cooling < 1:
            raise ValidationError(f"cooling rate must lie in (0, 1), got {self.cooling}")
        if self.epoch_length < 1 or self.t0_samples < 1:
            raise ValidationError("epoch length and temperature samples must be >= 1")
        if self.step_scale <= 0:
            raise ValidationError(f"step scale must be positive, got {self.step_scale}")
        if not 1 <= self.min_epochs <= self.max_epochs:
            raise ValidationError("need 1 <= min_epochs <= max_epochs")


class AnnealingAgent:
    """
    Metropolis search over integer S and continuous lambda_H.

    A proposal moves S by +-1 with probability 1/2 and always takes a Gaussian
    step in lambda_H of width step_scale times the rate range. The initial
    temperature is the mean |F| over random points; it cools geometrically
    after every epoch. The search stops once a full epoch improves the best
    value by less than ``tol`` (not before ``min_epochs``).
    """

    method = "simulated_annealing"

    def __init__(self, problem: OptimizationProblem, params: Optional[AnnealingSettings] = None,
                 seed: int = 0, evaluator: Optional[ConstraintEvaluator] = None):
        self.problem = problem
        self.params = params or AnnealingSettings()
        self.seed = seed
        self.evaluator = evaluator or ConstraintEvaluator(problem)

    def _random_point(self, rng: np.random.Generator) -> Tuple[int, float]:
        p = self.problem
        S = int(rng.integers(p.s_min, p.s_max + 1))
        lam = self.evaluator.quantize(p.lambda_min + rng.random() * (p.lambda_max - p.lambda_min))
        return S, min(max(lam, p.lambda_min), p.lambda_max)

    def initial_temperature(self, rng: np.random.Generator) -> float:
        samples = [self.evaluator.objective(*self._random_point(rng))[0] for _ in range(self.params.t0_samples)]
        return max(float(np.mean(np.abs(samples))), 1e-12)

    def _neighbour(self, S: int, lam: float, rng: np.random.Generator) -> Tuple[int, float]:
        p = self.problem
        if rng.random() < 0.5:
            S = S + (1 if rng.random() < 0.5 else -1)
            S = min(max(S, p.s_min), p.s_max)
        lam = lam + rng.normal(0.0, self.params.step_scale * (p.lambda_max - p.lambda_min))
        lam = self.evaluator.quantize(min(max(lam, p.lambda_min), p.lambda_max))
        return S, min(max(lam, p.lambda_min), p.lambda_max)

    def run(self) -> OptimizationResult:
        cfg = self.params
        rng = np.random.default_rng(self.seed)
        T = self.initial_temperature(rng)
        print(f"🔥 Simulated annealing from T0={T:.4g}, alpha={cfg.cooling}, seed={self.seed}")
        S, lam = self._random_point(rng)
        f, p_d, p_pre = self.evaluator.objective(S, lam)
        best = (f, S, lam, p_d, p_pre)
        feasible_best = best if self.problem.feasible(p_d, p_pre) else None
        history = [f]
        proposals = 0
        for epoch in range(cfg.max_epochs):
            best_at_start = best[0]
            for _ in range(cfg.epoch_length):
                proposals += 1
                S_new, lam_new = self._neighbour(S, lam, rng)
                f_new, d_new, pre_new = self.evaluator.objective(S_new, lam_new)
                delta = f_new - f
                if delta < 0 or rng.random() < math.exp(-delta / T):
                    S, lam, f = S_new, lam_new, f_new
                    if f < best[0]:
                        best = (f, S, lam, d_new, pre_new)
                    if self.problem.feasible(d_new, pre_new) and (feasible_best is None or f < feasible_best[0]):
                        feasible_best = (f, S, lam, d_new, pre_new)
            history.append(best[0])
            T *= cfg.cooling
            logger.debug("epoch %d: T=%.3e, best F=%.6f", epoch, T, best[0])
            if epoch + 1 >= cfg.min_epochs and best_at_start - best[0] < cfg.tol:
                break
        chosen, feasible = (feasible_best, True) if feasible_best is not None else (best, False)
        value, S_star, lam_star, d_star, pre_star = chosen
        print(f"   {'✅' if feasible else '⚠️'} S*={S_star}, lambda_H*={lam_star:g} after {proposals} proposals")
        result = OptimizationResult(
            method=self.method, S=S_star, lambda_h=lam_star, P_d=d_star, P_preempt=pre_star,
            iterations=proposals, evaluations=self.evaluator.evaluations, feasible=feasible,
            objective=value, history=history,
        )
        return self.evaluator.verify(result)


def simulated_annealing(problem: OptimizationProblem, cooling: float = 0.95, epoch_length: int = 50,
                        step_scale: float = 0.1, seed: int = 0, min_epochs: int = 20,
                        max_epochs: int = 400) -> OptimizationResult:
    params = AnnealingSettings(cooling=cooling, epoch_length=epoch_length, step_scale=step_scale,
                               min_epochs=min_epochs, max_epochs=max_epochs)
    return AnnealingAgent(problem, params, seed).run()
