"""Result containers: generator blocks, steady state, measures, simulation estimates."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from src.models.state import LevelLayout
from src.models.stochastic import Mode

SCALAR_MEASURES = (
    "P_d",
    "P_b",
    "P_preempt",
    "P_orbit_join",
    "P_leave",
    "E_H",
    "E_N",
    "E_orbit",
    "T_P",
    "T_P_literal",
    "theta_r_succ",
)
DISTRIBUTION_MEASURES = ("P_H", "P_N", "P_orbit")


@dataclass
class LevelBlocks:
    """The three generator blocks touching one level."""

    level: int
    main: np.ndarray
    up: Optional[np.ndarray]
    down: Optional[np.ndarray]
    layout: LevelLayout

    def row_sums(self) -> np.ndarray:
        total = self.main.sum(axis=1)
        if self.up is not None:
            total = total + self.up.sum(axis=1)
        if self.down is not None:
            total = total + self.down.sum(axis=1)
        return total


@dataclass
class SteadyState:
    """Per-level probability vectors and the rate matrices that produced them."""

    M: int
    z: List[np.ndarray]
    R: List[np.ndarray]
    layouts: List[LevelLayout]
    mode: Mode
    residual: float = 0.0
    clamped: int = 0
    method: str = "matrix-analytic"

    @property
    def level_mass(self) -> np.ndarray:
        return np.array([float(zl.sum()) for zl in self.z])

    @property
    def total_mass(self) -> float:
        return float(self.level_mass.sum())

    @property
    def tail_mass(self) -> float:
        return float(self.z[self.M].sum())

    def segment(self, level: int, kappa: int, j: int) -> np.ndarray:
        return self.z[level][self.layouts[level].segment_slice(kappa, j)]

    def flat(self) -> np.ndarray:
        return np.concatenate(self.z)


@dataclass
class MeasureReport:
    """Stationary performance measures; None marks a measure undefined for the config."""

    M: int
    P_d: Optional[float]
    P_b: Optional[float]
    P_preempt: Optional[float]
    P_orbit_join: Optional[float]
    P_leave: Optional[float]
    E_H: float
    E_N: float
    E_orbit: float
    T_P: float
    T_P_literal: float
    theta_r_succ: float
    P_H: np.ndarray = field(repr=False)
    P_N: np.ndarray = field(repr=False)
    P_orbit: np.ndarray = field(repr=False)

    def scalars(self) -> Dict[str, Optional[float]]:
        return {name: getattr(self, name) for name in SCALAR_MEASURES}

    def to_flat(self) -> Dict[str, Any]:
        """Flat key-value view; distributions are expanded as ``P_H[j]``."""
        flat: Dict[str, Any] = {"M": self.M}
        flat.update(self.scalars())
        for name in DISTRIBUTION_MEASURES:
            for idx, value in enumerate(getattr(self, name)):
                flat[f"{name}[{idx}]"] = float(value)
        return flat

    def get(self, name: str) -> Optional[float]:
        if "[" in name:
            base, idx = name.rstrip("]").split("[")
            values = getattr(self, base)
            k = int(idx)
            return float(values[k]) if k < len(values) else 0.0
        return getattr(self, name)


@dataclass
class SimEstimate:
    """Batch-means point estimates and standard errors of one simulation run."""

    estimates: Dict[str, float]
    stderr: Dict[str, float]
    events: int
    seed: int
    counters: Dict[str, int] = field(default_factory=dict)
    batches: int = 0

    def brackets(self, name: str, value: float, k: float = 3.0) -> bool:
        """True when ``value`` lies within k standard errors of the estimate."""
        return abs(self.estimates[name] - value) <= k * self.stderr[name]

    def rows(self, param: str = "") -> List[Dict[str, Any]]:
        return [
            {
                "param": param,
                "measure": name,
                "estimate": self.estimates[name],
                "stderr": self.stderr[name],
                "events": self.events,
                "seed": self.seed,
            }
            for name in self.estimates
        ]
