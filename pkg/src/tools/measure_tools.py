"""Stationary performance measures computed from a SteadyState."""

import logging
from typing import Callable, Tuple

import numpy as np

from src.models.results import MeasureReport, SteadyState
from src.models.stochastic import ModelConfig, fundamental_rates
from src.tools import kron_tools
from src.tools.decorators import measure
from src.tools.state_tools import orbit_algebra
from src.utils.errors import UndefinedMeasureError

logger = logging.getLogger(__name__)


def _segments(ss: SteadyState, predicate: Callable[[int, int], bool] = lambda k, j: True, levels=None):
    """Yield (level, kappa, j, segment vector) for segments matching ``predicate``."""
    for level in (range(ss.M + 1) if levels is None else levels):
        layout = ss.layouts[level]
        for kappa, j in layout.segments:
            if predicate(kappa, j):
                yield level, kappa, j, ss.segment(level, kappa, j)


def _arrival_flow(ss: SteadyState, cfg: ModelConfig, marked: np.ndarray,
                  predicate: Callable[[int, int], bool], levels=None) -> float:
    """Σ z(l,kappa,j) (marked e ⊗ e) over matching segments."""
    exit_rates = marked.sum(axis=1)
    L = cfg.mmap.L
    total = 0.0
    for _, _, _, seg in _segments(ss, predicate, levels):
        total += float(seg.reshape(L, -1).sum(axis=1) @ exit_rates)
    return total


def _rates(cfg: ModelConfig) -> Tuple[float, float]:
    lam_h, lam_n, _ = fundamental_rates(cfg.mmap)
    return lam_h, lam_n


def completion_flows(ss: SteadyState, cfg: ModelConfig) -> Tuple[float, float]:
    """(handoff, new-call) service completion flows."""
    sh, sn = cfg.service_h, cfg.service_n
    handoff = new = 0.0
    for level, kappa, j, seg in _segments(ss):
        L, h, n, W = ss.layouts[level].factor_dims(kappa, j)
        tensor = seg.reshape(L, h, n, W)
        if j >= 1:
            handoff += float(tensor.sum(axis=(0, 2, 3)) @ kron_tools.phi_service(sh, j).sum(axis=1))
        if kappa - j >= 1:
            new += float(tensor.sum(axis=(0, 1, 3)) @ kron_tools.phi_service(sn, kappa - j).sum(axis=1))
    return handoff, new


def _orbit_exit_flow(ss: SteadyState, cfg: ModelConfig, which: str,
                     predicate: Callable[[int, int], bool] = lambda k, j: True) -> float:
    orbit = orbit_algebra(cfg, ss.mode)
    total = 0.0
    for level in range(1, ss.M + 1):
        W = ss.layouts[level].orbit_dim
        exits = getattr(orbit, which)(level).sum(axis=1)
        for _, _, _, seg in _segments(ss, predicate, [level]):
            total += float(seg.reshape(-1, W).sum(axis=0) @ exits)
    return total


def abandonment_flow(ss: SteadyState, cfg: ModelConfig) -> float:
    return _orbit_exit_flow(ss, cfg, "leave")


def truncation_loss_flow(ss: SteadyState, cfg: ModelConfig) -> float:
    """New calls lost at the closed level M: blocked arrivals (whose MMAP phase change is kept) plus preemption victims."""
    S = cfg.S
    blocked = _arrival_flow(ss, cfg, cfg.mmap.C_N, lambda k, j: k == S, [ss.M])
    preempted = _arrival_flow(ss, cfg, cfg.mmap.C_H, lambda k, j: k == S and j < S, [ss.M])
    return blocked + preempted


@measure("P_d", "Dropping probability of a handoff call")
def dropping_probability(ss: SteadyState, cfg: ModelConfig) -> float:
    lam_h, _ = _rates(cfg)
    if lam_h <= 0:
        raise UndefinedMeasureError("P_d is undefined when the handoff rate is 0")
    S = cfg.S
    return _arrival_flow(ss, cfg, cfg.mmap.C_H, lambda k, j: k == S and j == S) / lam_h


@measure("P_b", "Blocking probability of a new call, read at level M-1")
def blocking_probability(ss: SteadyState, cfg: ModelConfig) -> float:
    _, lam_n = _rates(cfg)
    if lam_n <= 0:
        raise UndefinedMeasureError("P_b is undefined when the new-call rate is 0")
    S = cfg.S
    return _arrival_flow(ss, cfg, cfg.mmap.C_N, lambda k, j: k == S, [ss.M - 1]) / lam_n


@measure("P_preempt", "Probability that a handoff arrival preempts a new call in service")
def preemption_probability(ss: SteadyState, cfg: ModelConfig) -> float:
    lam_h, _ = _rates(cfg)
    if lam_h <= 0:
        raise UndefinedMeasureError("P_preempt is undefined when the handoff rate is 0")
    S = cfg.S
    return _arrival_flow(ss, cfg, cfg.mmap.C_H, lambda k, j: k == S and j < S) / lam_h


@measure("P_orbit_join", "Probability that a new call joins the orbit on arrival")
def orbit_join_probability(ss: SteadyState, cfg: ModelConfig) -> float:
    _, lam_n = _rates(cfg)
    if lam_n <= 0:
        raise UndefinedMeasureError("P_orbit_join is undefined when the new-call rate is 0")
    S = cfg.S
    return _arrival_flow(ss, cfg, cfg.mmap.C_N, lambda k, j: k == S) / lam_n


@measure("P_leave", "Probability that a retrial call leaves without service", kind="ratio")
def leave_without_service_probability(ss: SteadyState, cfg: ModelConfig) -> float:
    theta = cfg.retrial.mean_rate
    if theta <= 0:
        raise UndefinedMeasureError("P_leave is undefined when the retrial rate is 0")
    return abandonment_flow(ss, cfg) / theta


@measure("theta_r_succ", "Intensity of successful retrials into an idle channel", kind="rate")
def retrial_success_rate(ss: SteadyState, cfg: ModelConfig) -> float:
    S = cfg.S
    return _orbit_exit_flow(ss, cfg, "retry", lambda k, j: k < S)


@measure("T_P", "Throughput: completion flow of both call classes", kind="rate")
def throughput(ss: SteadyState, cfg: ModelConfig) -> float:
    handoff, new = completion_flows(ss, cfg)
    return handoff + new


@measure("T_P_literal", "Throughput with per-state rate j*mu_H + (kappa-j)*mu_N", kind="rate")
def throughput_literal(ss: SteadyState, cfg: ModelConfig) -> float:
    mu_h, mu_n = cfg.service_h.mean_rate, cfg.service_n.mean_rate
    total = 0.0
    for _, kappa, j, seg in _segments(ss):
        total += (j * mu_h + (kappa - j) * mu_n) * float(seg.sum())
    return total


def service_mix_distributions(ss: SteadyState, cfg: ModelConfig) -> Tuple[np.ndarray, np.ndarray, float, float]:
    """(P_H, P_N, E_H, E_N); indexes run over 0..S."""
    S = cfg.S
    P_H = np.zeros(S + 1)
    P_N = np.zeros(S + 1)
    for _, kappa, j, seg in _segments(ss):
        mass = float(seg.sum())
        P_H[j] += mass
        P_N[kappa - j] += mass
    idx = np.arange(S + 1)
    return P_H, P_N, float(idx[1:] @ P_H[1:]), float(idx[1:] @ P_N[1:])


def orbit_distribution(ss: SteadyState) -> Tuple[np.ndarray, float]:
    P_orbit = ss.level_mass
    return P_orbit, float(np.arange(ss.M + 1)[1:] @ P_orbit[1:])


def _optional(fn, ss: SteadyState, cfg: ModelConfig):
    try:
        return fn(ss, cfg)
    except UndefinedMeasureError as exc:
        logger.debug("%s", exc)
        return None


def compute_measures(ss: SteadyState, cfg: ModelConfig) -> MeasureReport:
    P_H, P_N, E_H, E_N = service_mix_distributions(ss, cfg)
    P_orbit, E_orbit = orbit_distribution(ss)
    return MeasureReport(
        M=ss.M,
        P_d=_optional(dropping_probability, ss, cfg),
        P_b=_optional(blocking_probability, ss, cfg),
        P_preempt=_optional(preemption_probability, ss, cfg),
        P_orbit_join=_optional(orbit_join_probability, ss, cfg),
        P_leave=_optional(leave_without_service_probability, ss, cfg),
        E_H=E_H,
        E_N=E_N,
        E_orbit=E_orbit,
        T_P=throughput(ss, cfg),
        T_P_literal=throughput_literal(ss, cfg),
        theta_r_succ=retrial_success_rate(ss, cfg),
        P_H=P_H,
        P_N=P_N,
        P_orbit=P_orbit,
    )


__all__ = [
    "completion_flows",
    "abandonment_flow",
    "truncation_loss_flow",
    "dropping_probability",
    "blocking_probability",
    "preemption_probability",
    "orbit_join_probability",
    "leave_without_service_probability",
    "retrial_success_rate",
    "throughput",
    "throughput_literal",
    "service_mix_distributions",
    "orbit_distribution",
    "compute_measures",
]
