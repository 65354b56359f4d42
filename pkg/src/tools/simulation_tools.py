"""Next-event simulation of the retrial model.

Runs directly on the model ingredients, independent of the generator code.
Every active phase competes with an exponential clock: the arrival process,
each busy channel and each orbit customer. Estimates are batch means over the
post-warmup events.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.config import settings
from src.models.results import SimEstimate
from src.models.stochastic import ModelConfig
from src.utils.errors import SimulationError

logger = logging.getLogger(__name__)

COUNTERS = (
    "new_arrivals",
    "handoff_arrivals",
    "drops",
    "preemptions",
    "blocked_new",
    "blocked_at_cap",
    "lost_at_cap",
    "orbit_joins",
    "completions_handoff",
    "completions_new",
    "abandonments",
    "retrial_successes",
    "retrial_failures",
)

_RANDOM_CHUNK = 65536


@dataclass
class SimState:
    """Mutable trajectory state.

    Handoff services and orbit customers are kept as counts per phase. New-call
    services are a list of phases in start order; preemption evicts the last.
    """

    clock: float
    phase: int
    handoff: np.ndarray
    new: List[int]
    orbit: np.ndarray
    counters: Dict[str, int] = field(default_factory=lambda: {name: 0 for name in COUNTERS})

    @property
    def busy(self) -> int:
        return int(self.handoff.sum()) + len(self.new)

    @property
    def orbit_size(self) -> int:
        return int(self.orbit.sum())


def _outcome_table(rows: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Total rate per phase and cumulative outcome probabilities per phase."""
    totals = rows.sum(axis=1)
    cumulative = np.zeros_like(rows)
    for p, total in enumerate(totals):
        if total > 0:
            cumulative[p] = np.cumsum(rows[p]) / total
    return totals, cumulative


def _off_diagonal(matrix: np.ndarray) -> np.ndarray:
    return matrix - np.diag(np.diag(matrix))


class _Stream:
    """Chunked uniforms from a counter-based Philox generator."""

    def __init__(self, seed: int):
        self.rng = np.random.Generator(np.random.Philox(seed))
        self._buffer = self.rng.random(_RANDOM_CHUNK)
        self._pos = 0

    def next(self) -> float:
        if self._pos >= _RANDOM_CHUNK:
            self._buffer = self.rng.random(_RANDOM_CHUNK)
            self._pos = 0
        value = self._buffer[self._pos]
        self._pos += 1
        return float(value)


def _pick(cumulative: np.ndarray, u: float) -> int:
    idx = int(np.searchsorted(cumulative, u, side="right"))
    return min(idx, cumulative.size - 1)


class _BatchAccumulator:
    def __init__(self, S: int):
        self.S = S
        self.time = 0.0
        self.handoff_area = 0.0
        self.new_area = 0.0
        self.orbit_area = 0.0
        self.literal_area = 0.0
        self.p_h = np.zeros(S + 1)
        self.p_n = np.zeros(S + 1)
        self.p_orbit: Dict[int, float] = {}
        self.start_counters: Dict[str, int] = {}
        self.end_counters: Dict[str, int] = {}

    def delta(self, name: str) -> int:
        return self.end_counters[name] - self.start_counters[name]


class RetrialSimulator:
    """Simulates one configuration; ``run`` is deterministic for a given seed.

    With ``truncation_level`` M the orbit is capped at M: a blocked or preempted
    new call that finds M customers in orbit is lost. P_b counts blocked arrivals
    that find M - 1.
    """

    def __init__(self, cfg: ModelConfig, truncation_level: Optional[int] = None,
                 rate_bound: float = settings.SIM_RATE_BOUND):
        self.cfg = cfg
        self.truncation_level = truncation_level
        self.rate_bound = rate_bound
        m, sh, sn, r = cfg.mmap, cfg.service_h, cfg.service_n, cfg.retrial
        self.L, self.MH, self.MN, self.N = m.L, sh.M, sn.M, r.N
        self.mmap_rate, self.mmap_cum = _outcome_table(np.hstack([_off_diagonal(m.C0), m.C_N, m.C_H]))
        self.h_rate, self.h_cum = _outcome_table(np.hstack([_off_diagonal(sh.A), sh.A0.reshape(-1, 1)]))
        self.n_rate, self.n_cum = _outcome_table(np.hstack([_off_diagonal(sn.A), sn.A0.reshape(-1, 1)]))
        self.o_rate, self.o_cum = _outcome_table(np.hstack([
            _off_diagonal(r.Gamma), r.exit_leave.reshape(-1, 1), r.exit_retry.reshape(-1, 1)
        ]))
        self.beta_h = np.cumsum(sh.beta)
        self.beta_n = np.cumsum(sn.beta)
        self.gamma = np.cumsum(r.gamma)
        self.mu_h, self.mu_n = sh.mean_rate, sn.mean_rate
        self.theta = r.mean_rate

    def initial_state(self, stream: _Stream) -> SimState:
        from src.models.stochastic import stationary_vector

        phase = _pick(np.cumsum(stationary_vector(self.cfg.mmap)), stream.next())
        return SimState(
            clock=0.0,
            phase=phase,
            handoff=np.zeros(self.MH, dtype=np.int64),
            new=[],
            orbit=np.zeros(self.N, dtype=np.int64),
        )

    def _capped(self, state: SimState) -> bool:
        return self.truncation_level is not None and state.orbit_size >= self.truncation_level

    def _arrival(self, state: SimState, stream: _Stream, outcome: int) -> None:
        kind, target = divmod(outcome, self.L)
        state.phase = target
        c = state.counters
        S = self.cfg.S
        if kind == 1:
            c["new_arrivals"] += 1
            if state.busy < S:
                state.new.append(_pick(self.beta_n, stream.next()))
                return
            c["blocked_new"] += 1
            if self.truncation_level is not None and state.orbit_size == self.truncation_level - 1:
                c["blocked_at_cap"] += 1
            if self._capped(state):
                c["lost_at_cap"] += 1
                return
            c["orbit_joins"] += 1
            state.orbit[_pick(self.gamma, stream.next())] += 1
        elif kind == 2:
            c["handoff_arrivals"] += 1
            if state.busy < S:
                state.handoff[_pick(self.beta_h, stream.next())] += 1
            elif state.new:
                state.new.pop()  # last started
                state.handoff[_pick(self.beta_h, stream.next())] += 1
                c["preemptions"] += 1
                if self._capped(state):
                    c["lost_at_cap"] += 1
                    return
                state.orbit[_pick(self.gamma, stream.next())] += 1
                c["orbit_joins"] += 1
            else:
                c["drops"] += 1

    def _handoff_service(self, state: SimState, phase: int, stream: _Stream) -> None:
        outcome = _pick(self.h_cum[phase], stream.next())
        state.handoff[phase] -= 1
        if outcome == self.MH:
            state.counters["completions_handoff"] += 1
        else:
            state.handoff[outcome] += 1

    def _new_service(self, state: SimState, position: int, stream: _Stream) -> None:
        outcome = _pick(self.n_cum[state.new[position]], stream.next())
        if outcome == self.MN:
            del state.new[position]
            state.counters["completions_new"] += 1
        else:
            state.new[position] = outcome

    def _orbit(self, state: SimState, phase: int, stream: _Stream) -> None:
        outcome = _pick(self.o_cum[phase], stream.next())
        state.orbit[phase] -= 1
        c = state.counters
        if outcome < self.N:
            state.orbit[outcome] += 1
        elif outcome == self.N:
            c["abandonments"] += 1
        elif state.busy < self.cfg.S:
            c["retrial_successes"] += 1
            state.new.append(_pick(self.beta_n, stream.next()))
        else:
            c["retrial_failures"] += 1
            state.orbit[_pick(self.gamma, stream.next())] += 1

    def step(self, state: SimState, stream: _Stream) -> float:
        """Advance one event; returns the holding time of the state left behind."""
        weights = np.concatenate((
            [self.mmap_rate[state.phase]],
            state.handoff * self.h_rate,
            self.n_rate[np.asarray(state.new, dtype=np.int64)],
            state.orbit * self.o_rate,
        ))
        cumulative = np.cumsum(weights)
        total = float(cumulative[-1])
        if not 0 < total <= self.rate_bound:
            raise SimulationError(f"event rate {total:.3e} outside (0, {self.rate_bound:.1e}]")
        dt = -np.log1p(-stream.next()) / total
        state.clock += dt
        idx = min(int(np.searchsorted(cumulative, stream.next() * total, side="right")), weights.size - 1)
        if idx == 0:
            self._arrival(state, stream, _pick(self.mmap_cum[state.phase], stream.next()))
        elif idx <= self.MH:
            self._handoff_service(state, idx - 1, stream)
        elif idx <= self.MH + len(state.new):
            self._new_service(state, idx - 1 - self.MH, stream)
        else:
            self._orbit(state, idx - 1 - self.MH - len(state.new), stream)
        return dt

    def run(self, horizon: int, seed: int, warmup_fraction: float = settings.SIM_WARMUP,
            batches: int = settings.SIM_BATCHES) -> Tuple[SimEstimate, SimState]:
        if horizon < settings.SIM_MIN_HORIZON:
            raise SimulationError(f"horizon {horizon} is below the minimum of {settings.SIM_MIN_HORIZON} events")
        if not isinstance(seed, (int, np.integer)) or seed < 0:
            raise SimulationError(f"seed must be a nonnegative integer, got {seed!r}")
        if not 0 <= warmup_fraction < 1 or batches < 2:
            raise SimulationError("warmup fraction must be in [0, 1) and batches >= 2")
        stream = _Stream(int(seed))
        state = self.initial_state(stream)
        warmup = int(horizon * warmup_fraction)
        batch_len = (horizon - warmup) // batches
        for _ in range(warmup):
            self.step(state, stream)
        S = self.cfg.S
        results: List[_BatchAccumulator] = []
        for _ in range(batches):
            acc = _BatchAccumulator(S)
            acc.start_counters = dict(state.counters)
            for _ in range(batch_len):
                n_h, n_n, n_o = int(state.handoff.sum()), len(state.new), state.orbit_size
                dt = self.step(state, stream)
                acc.time += dt
                acc.handoff_area += dt * n_h
                acc.new_area += dt * n_n
                acc.orbit_area += dt * n_o
                acc.literal_area += dt * (n_h * self.mu_h + n_n * self.mu_n)
                acc.p_h[n_h] += dt
                acc.p_n[n_n] += dt
                acc.p_orbit[n_o] = acc.p_orbit.get(n_o, 0.0) + dt
            acc.end_counters = dict(state.counters)
            results.append(acc)
        estimate = self._summarise(results, horizon, int(seed), state)
        logger.info("simulated %d events (seed %d), clock %.3f", horizon, seed, state.clock)
        return estimate, state

    def _summarise(self, results: Sequence[_BatchAccumulator], horizon: int, seed: int,
                   state: SimState) -> SimEstimate:
        S = self.cfg.S
        max_orbit = max((max(acc.p_orbit) for acc in results if acc.p_orbit), default=0)
        samples: Dict[str, List[float]] = {}

        def ratio(num: int, den: int) -> float:
            return num / den if den > 0 else np.nan

        for acc in results:
            t = acc.time
            row = {
                "P_d": ratio(acc.delta("drops"), acc.delta("handoff_arrivals")),
                "P_preempt": ratio(acc.delta("preemptions"), acc.delta("handoff_arrivals")),
                "P_orbit_join": ratio(acc.delta("blocked_new"), acc.delta("new_arrivals")),
                "P_leave": acc.delta("abandonments") / t / self.theta,
                "theta_r_succ": acc.delta("retrial_successes") / t,
                "T_P": (acc.delta("completions_handoff") + acc.delta("completions_new")) / t,
                "T_P_literal": acc.literal_area / t,
                "E_H": acc.handoff_area / t,
                "E_N": acc.new_area / t,
                "E_orbit": acc.orbit_area / t,
            }
            if self.truncation_level is not None:
                row["P_b"] = ratio(acc.delta("blocked_at_cap"), acc.delta("new_arrivals"))
            for k in range(S + 1):
                row[f"P_H[{k}]"] = acc.p_h[k] / t
                row[f"P_N[{k}]"] = acc.p_n[k] / t
            for k in range(max_orbit + 1):
                row[f"P_orbit[{k}]"] = acc.p_orbit.get(k, 0.0) / t
            for name, value in row.items():
                samples.setdefault(name, []).append(value)

        estimates, stderr = {}, {}
        for name, values in samples.items():
            arr = np.asarray(values, dtype=float)
            arr = arr[~np.isnan(arr)]
            if arr.size == 0:
                continue
            estimates[name] = float(arr.mean())
            stderr[name] = float(arr.std(ddof=1) / np.sqrt(arr.size)) if arr.size > 1 else 0.0
        counters = dict(state.counters)
        counters["in_service_new"] = len(state.new)
        counters["in_service_handoff"] = int(state.handoff.sum())
        counters["in_orbit"] = state.orbit_size
        return SimEstimate(estimates=estimates, stderr=stderr, events=horizon, seed=seed,
                           counters=counters, batches=len(results))


def simulate(cfg: ModelConfig, horizon: int, seed: int, warmup_fraction: float = settings.SIM_WARMUP,
             batches: int = settings.SIM_BATCHES, truncation_level: Optional[int] = None) -> SimEstimate:
    estimate, _ = RetrialSimulator(cfg, truncation_level).run(horizon, seed, warmup_fraction, batches)
    return estimate


def _simulate_point(args) -> Tuple[float, SimEstimate]:
    cfg, value, horizon, seed, warmup, batches, truncation_level = args
    return value, simulate(cfg, horizon, seed, warmup, batches, truncation_level)


def trend_sweep(cfg: ModelConfig, axis: str, grid: Sequence[float], horizon: int, seed: int,
                warmup_fraction: float = settings.SIM_WARMUP, batches: int = settings.SIM_BATCHES,
                workers: int = settings.WORKERS, truncation_level: Optional[int] = None
                ) -> List[Tuple[float, SimEstimate]]:
    """One estimate per grid point; every point reuses ``seed`` (common random numbers)."""
    from src.config.loader import apply_axis

    if len(grid) == 0:
        raise SimulationError("sweep grid is empty")
    jobs = [(apply_axis(cfg, axis, value), value, horizon, seed, warmup_fraction, batches, truncation_level)
            for value in grid]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_simulate_point, jobs))
    return [_simulate_point(job) for job in jobs]


__all__ = ["SimState", "RetrialSimulator", "simulate", "trend_sweep", "COUNTERS"]
