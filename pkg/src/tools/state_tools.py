"""State-space enumeration for both orbit representations.

Component order inside a level is (kappa, j, v, s_H positions, s_N positions,
orbit descriptor), kappa and j ascending. In ordered mode the orbit descriptor
is a tuple of retrial phases in Kronecker order (first position most
significant). In lumped mode it is an occupancy vector over the N retrial
phases, enumerated in colexicographic order.
"""

import bisect
import functools
import itertools
from math import comb
from typing import Dict, List, Tuple

import numpy as np

from src.models.state import LevelLayout, StateCoord
from src.models.stochastic import Mode, ModelConfig, PhaseType, RetrialPH
from src.tools import kron_tools
from src.tools.kron_tools import check_cap
from src.utils.errors import ValidationError


@functools.lru_cache(maxsize=512)
def occupancy_vectors(N: int, l: int) -> Tuple[Tuple[int, ...], ...]:
    """All length-N nonnegative vectors summing to l, colex order."""
    vectors = set()
    for multiset in itertools.combinations_with_replacement(range(N), l):
        counts = [0] * N
        for phase in multiset:
            counts[phase] += 1
        vectors.add(tuple(counts))
    return tuple(sorted(vectors, key=lambda n: n[::-1]))


@functools.lru_cache(maxsize=512)
def _occupancy_rank(N: int, l: int) -> Dict[Tuple[int, ...], int]:
    return {n: idx for idx, n in enumerate(occupancy_vectors(N, l))}


def orbit_dim(N: int, l: int, mode: Mode) -> int:
    if mode is Mode.ORDERED:
        return N ** l
    return comb(l + N - 1, N - 1)


@functools.lru_cache(maxsize=1024)
def _layout(S: int, L: int, M_H: int, M_N: int, N: int, level: int, mode: Mode) -> LevelLayout:
    W = orbit_dim(N, level, mode)
    offsets: Dict[Tuple[int, int], int] = {}
    total = 0
    for kappa in range(S + 1):
        for j in range(kappa + 1):
            offsets[(kappa, j)] = total
            total += L * M_H ** j * M_N ** (kappa - j) * W
    return LevelLayout(level=level, mode=mode, S=S, L=L, M_H=M_H, M_N=M_N, N=N,
                       orbit_dim=W, offsets=offsets, dim=total)


def build_layout(cfg: ModelConfig, level: int, mode: Mode = None) -> LevelLayout:
    if level < 0:
        raise ValidationError(f"level must be >= 0, got {level}")
    return _layout(cfg.S, cfg.mmap.L, cfg.service_h.M, cfg.service_n.M, cfg.retrial.N,
                   level, mode or cfg.mode)


def _segment_shape(layout: LevelLayout, kappa: int, j: int) -> Tuple[int, ...]:
    return (layout.L,) + (layout.M_H,) * j + (layout.M_N,) * (kappa - j) + (layout.orbit_dim,)


def _orbit_index(orbit: Tuple[int, ...], layout: LevelLayout) -> int:
    if layout.mode is Mode.ORDERED:
        if len(orbit) != layout.level or any(not 0 <= p < layout.N for p in orbit):
            raise ValidationError(f"ordered orbit {orbit} invalid for level {layout.level}")
        if layout.level == 0:
            return 0
        return int(np.ravel_multi_index(orbit, (layout.N,) * layout.level))
    rank = _occupancy_rank(layout.N, layout.level)
    if orbit not in rank:
        raise ValidationError(f"occupancy {orbit} invalid for level {layout.level}, N={layout.N}")
    return rank[orbit]


def _orbit_descriptor(index: int, layout: LevelLayout) -> Tuple[int, ...]:
    if layout.mode is Mode.ORDERED:
        if layout.level == 0:
            return ()
        return tuple(int(x) for x in np.unravel_index(index, (layout.N,) * layout.level))
    return occupancy_vectors(layout.N, layout.level)[index]


def encode(c: StateCoord, layout: LevelLayout) -> int:
    """Flat index of ``c`` within its level."""
    if c.level != layout.level:
        raise ValidationError(f"coordinate level {c.level} does not match layout level {layout.level}")
    if not 0 <= c.j <= c.kappa <= layout.S:
        raise ValidationError(f"invalid (kappa, j) = ({c.kappa}, {c.j}) for S={layout.S}")
    if len(c.s_h) != c.j or len(c.s_n) != c.kappa - c.j:
        raise ValidationError("service phase tuples do not match (kappa, j)")
    digits = (c.v,) + tuple(c.s_h) + tuple(c.s_n) + (_orbit_index(tuple(c.orbit), layout),)
    shape = _segment_shape(layout, c.kappa, c.j)
    if any(not 0 <= d < n for d, n in zip(digits, shape)):
        raise ValidationError(f"coordinate {c} out of range for segment shape {shape}")
    return layout.offsets[(c.kappa, c.j)] + int(np.ravel_multi_index(digits, shape))


def decode(index: int, layout: LevelLayout) -> StateCoord:
    if not 0 <= index < layout.dim:
        raise ValidationError(f"index {index} outside [0, {layout.dim})")
    segments = layout.segments
    starts = [layout.offsets[s] for s in segments]
    kappa, j = segments[bisect.bisect_right(starts, index) - 1]
    local = index - layout.offsets[(kappa, j)]
    digits = [int(d) for d in np.unravel_index(local, _segment_shape(layout, kappa, j))]
    v = digits[0]
    s_h = tuple(digits[1:1 + j])
    s_n = tuple(digits[1 + j:1 + kappa])
    orbit = _orbit_descriptor(digits[-1], layout)
    return StateCoord(level=layout.level, kappa=kappa, j=j, v=v, s_h=s_h, s_n=s_n, orbit=orbit)


def enumerate_states(layout: LevelLayout) -> List[StateCoord]:
    return [decode(i, layout) for i in range(layout.dim)]


@functools.lru_cache(maxsize=128)
def orbit_lump_matrix(N: int, l: int) -> np.ndarray:
    """0/1 map from ordered orbit tuples to occupancy vectors."""
    rank = _occupancy_rank(N, l)
    V = np.zeros((N ** l, len(rank)))
    for row, phases in enumerate(itertools.product(range(N), repeat=l)):
        counts = [0] * N
        for phase in phases:
            counts[phase] += 1
        V[row, rank[tuple(counts)]] = 1.0
    V.setflags(write=False)
    return V


def lump_matrix(level: int, cfg: ModelConfig) -> np.ndarray:
    """Aggregation matrix V from the ordered to the lumped layout of ``level``."""
    ordered = build_layout(cfg, level, Mode.ORDERED)
    lumped = build_layout(cfg, level, Mode.LUMPED)
    check_cap(ordered.dim, lumped.dim, level=level)
    V_orbit = orbit_lump_matrix(cfg.retrial.N, level)
    V = np.zeros((ordered.dim, lumped.dim))
    for kappa, j in ordered.segments:
        L, h, n, _ = ordered.factor_dims(kappa, j)
        V[ordered.segment_slice(kappa, j), lumped.segment_slice(kappa, j)] = np.kron(np.eye(L * h * n), V_orbit)
    return V


class OrderedOrbit:
    """Orbit operators on ordered tuples (Kronecker form)."""

    mode = Mode.ORDERED

    def __init__(self, retrial: RetrialPH):
        self.retrial = retrial

    def dim(self, l: int) -> int:
        return self.retrial.N ** l

    def internal(self, l: int) -> np.ndarray:
        return kron_tools.psi_orbit(self.retrial, l)

    def failed(self, l: int) -> np.ndarray:
        return kron_tools.psi_orbit_failed(self.retrial, l)

    def leave(self, l_plus_1: int) -> np.ndarray:
        return kron_tools.phi_orbit_leave(self.retrial, l_plus_1)

    def retry(self, l_plus_1: int) -> np.ndarray:
        return kron_tools.phi_orbit_retry(self.retrial, l_plus_1)

    def success(self, l_plus_1: int, service_n: PhaseType) -> np.ndarray:
        return kron_tools.phi_orbit_success(self.retrial, l_plus_1, service_n)

    def join(self, l: int) -> np.ndarray:
        return kron_tools.orbit_join(self.retrial, l)


class LumpedOrbit:
    """Orbit operators on occupancy vectors; rates scale with occupancy counts."""

    mode = Mode.LUMPED

    def __init__(self, retrial: RetrialPH):
        self.retrial = retrial
        self._cache: Dict[Tuple[str, int], np.ndarray] = {}

    def dim(self, l: int) -> int:
        return orbit_dim(self.retrial.N, l, Mode.LUMPED)

    def _cached(self, key: Tuple[str, int], build) -> np.ndarray:
        matrix = self._cache.get(key)
        if matrix is None:
            matrix = build()
            matrix.setflags(write=False)
            self._cache[key] = matrix
        return matrix

    def _moves(self, l: int, rates: np.ndarray) -> np.ndarray:
        """n -> n - e_i + e_k at rate n_i * rates[i, k]; diagonal entries add in place."""
        N = self.retrial.N
        states = occupancy_vectors(N, l)
        rank = _occupancy_rank(N, l)
        out = np.zeros((len(states), len(states)))
        for a, n in enumerate(states):
            for i in range(N):
                if n[i] == 0:
                    continue
                for k in range(N):
                    rate = n[i] * rates[i, k]
                    if rate == 0:
                        continue
                    target = list(n)
                    target[i] -= 1
                    target[k] += 1
                    out[a, rank[tuple(target)]] += rate
        return out

    def _removals(self, l_plus_1: int, exit_vector: np.ndarray) -> np.ndarray:
        N = self.retrial.N
        source = occupancy_vectors(N, l_plus_1)
        rank = _occupancy_rank(N, l_plus_1 - 1)
        out = np.zeros((len(source), len(rank)))
        for a, n in enumerate(source):
            for i in range(N):
                if n[i] and exit_vector[i]:
                    target = list(n)
                    target[i] -= 1
                    out[a, rank[tuple(target)]] += n[i] * exit_vector[i]
        return out

    def internal(self, l: int) -> np.ndarray:
        return self._cached(("internal", l), lambda: self._moves(l, self.retrial.Gamma))

    def failed(self, l: int) -> np.ndarray:
        rates = np.outer(self.retrial.exit_retry, self.retrial.gamma)
        return self._cached(("failed", l), lambda: self._moves(l, rates))

    def leave(self, l_plus_1: int) -> np.ndarray:
        if l_plus_1 < 1:
            raise ValidationError("orbit removal needs at least one customer")
        return self._cached(("leave", l_plus_1), lambda: self._removals(l_plus_1, self.retrial.exit_leave))

    def retry(self, l_plus_1: int) -> np.ndarray:
        if l_plus_1 < 1:
            raise ValidationError("orbit removal needs at least one customer")
        return self._cached(("retry", l_plus_1), lambda: self._removals(l_plus_1, self.retrial.exit_retry))

    def success(self, l_plus_1: int, service_n: PhaseType) -> np.ndarray:
        return np.kron(service_n.beta.reshape(1, -1), self.retry(l_plus_1))

    def join(self, l: int) -> np.ndarray:
        def build() -> np.ndarray:
            N = self.retrial.N
            source = occupancy_vectors(N, l)
            rank = _occupancy_rank(N, l + 1)
            out = np.zeros((len(source), len(rank)))
            for a, n in enumerate(source):
                for k in range(N):
                    target = list(n)
                    target[k] += 1
                    out[a, rank[tuple(target)]] += self.retrial.gamma[k]
            return out

        return self._cached(("join", l), build)


def orbit_algebra(cfg: ModelConfig, mode: Mode = None):
    if (mode or cfg.mode) is Mode.ORDERED:
        return OrderedOrbit(cfg.retrial)
    return LumpedOrbit(cfg.retrial)


__all__ = [
    "occupancy_vectors",
    "orbit_dim",
    "build_layout",
    "encode",
    "decode",
    "enumerate_states",
    "orbit_lump_matrix",
    "lump_matrix",
    "OrderedOrbit",
    "LumpedOrbit",
    "orbit_algebra",
]
