"""State coordinates and per-level layouts."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Tuple

from src.models.stochastic import Mode


@dataclass(frozen=True)
class StateCoord:
    """One state of the level chain; phases are 0-based.

    ``orbit`` is an ordered tuple of retrial phases (ordered mode) or an
    occupancy vector of length N summing to ``level`` (lumped mode).
    """

    level: int
    kappa: int
    j: int
    v: int
    s_h: Tuple[int, ...] = ()
    s_n: Tuple[int, ...] = ()
    orbit: Tuple[int, ...] = ()

    @property
    def new_in_service(self) -> int:
        return self.kappa - self.j


@dataclass(frozen=True)
class LevelLayout:
    """Segment offsets of one orbit level, segments ordered by (kappa, j)."""

    level: int
    mode: Mode
    S: int
    L: int
    M_H: int
    M_N: int
    N: int
    orbit_dim: int
    offsets: Dict[Tuple[int, int], int] = field(repr=False)
    dim: int = 0

    @property
    def segments(self) -> Tuple[Tuple[int, int], ...]:
        return tuple(self.offsets)

    def factor_dims(self, kappa: int, j: int) -> Tuple[int, int, int, int]:
        """(L, M_H^j, M_N^(kappa-j), W) tensor factors of a segment."""
        return self.L, self.M_H ** j, self.M_N ** (kappa - j), self.orbit_dim

    def segment_size(self, kappa: int, j: int) -> int:
        L, h, n, w = self.factor_dims(kappa, j)
        return L * h * n * w

    def segment_slice(self, kappa: int, j: int) -> slice:
        start = self.offsets[(kappa, j)]
        return slice(start, start + self.segment_size(kappa, j))
