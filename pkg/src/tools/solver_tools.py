"""Steady state of the truncated level chain.

Backward recursion for the level rate matrices, boundary null vector,
forward propagation and normalisation, a dense direct-solve oracle, and the
truncation search that certifies the reported measures.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import linalg

from src.config import settings
from src.models.results import SteadyState
from src.models.stochastic import Mode, ModelConfig
from src.tools.generator_tools import GeneratorBuilder, assemble_truncated
from src.utils.errors import (
    ConvergenceError,
    IrreducibilityError,
    ResidualError,
    SingularBlockError,
    TruncationError,
)

logger = logging.getLogger(__name__)


@dataclass
class TruncationReport:
    M: int
    deltas: Dict[str, float] = field(default_factory=dict)
    tail_mass: float = 0.0
    eps: float = settings.TRUNC_EPS
    tried: List[int] = field(default_factory=list)

    def to_dict(self) -> Dict[str, object]:
        return {"M": self.M, "deltas": self.deltas, "tail_mass": self.tail_mass,
                "eps": self.eps, "tried": self.tried}


def _inf_norm(matrix: np.ndarray) -> float:
    if matrix.size == 0:
        return 0.0
    return float(np.abs(matrix).sum(axis=1).max())


def rate_matrices(cfg: ModelConfig, M: int, builder: Optional[GeneratorBuilder] = None,
                  residual_tol: Optional[float] = None) -> Tuple[List[np.ndarray], float]:
    """R^(0..M-1) by the backward recursion, R^(M) = 0.

    Returns the matrices and the largest residual of the three-term level equation
    Q_{l,l+1} + R^(l) Q_{l+1,l+1} + R^(l) R^(l+1) Q_{l+2,l+1} = 0 with the
    computed (clamped) R substituted, scaled by max(1, ||Q_{l+1,l+1}||).
    """
    builder = builder or GeneratorBuilder(cfg)
    tol = settings.RESIDUAL_TOL if residual_tol is None else residual_tol
    R: List[Optional[np.ndarray]] = [None] * M
    worst = 0.0
    R_next: Optional[np.ndarray] = None
    for level in range(M, 0, -1):
        main = builder.main(level, M)
        inner = np.array(main)
        if R_next is not None:
            inner += R_next @ builder.lower(level + 1)
        lu, piv = linalg.lu_factor(inner, check_finite=False)
        pivots = np.abs(np.diag(lu))
        if pivots.size and pivots.min() <= np.finfo(float).eps * max(1.0, _inf_norm(inner)) * inner.shape[0]:
            raise SingularBlockError(f"inner matrix singular at level {level}", level=level)
        up = builder.upper(level - 1)
        R_level = -linalg.lu_solve((lu, piv), up.T, trans=1, check_finite=False).T
        small = R_level < 0
        if np.any(small):
            R_level[small & (R_level >= -settings.CLAMP_TOL)] = 0.0
            if np.any(R_level < 0):
                logger.warning("R^(%d) has entries below %.1e", level - 1, -settings.CLAMP_TOL)
        residual = up + R_level @ main
        if R_next is not None:
            residual += (R_level @ R_next) @ builder.lower(level + 1)
        scaled = _inf_norm(residual) / max(1.0, _inf_norm(main))
        logger.debug("level %d: rate-matrix residual %.3e", level - 1, scaled)
        if scaled > tol:
            raise ResidualError(
                f"rate-matrix residual {scaled:.3e} exceeds {tol:.1e} at level {level - 1}",
                level=level - 1,
                residual=scaled,
            )
        worst = max(worst, scaled)
        R[level - 1] = R_level
        R_next = R_level
    return R, worst


def boundary_solve(cfg: ModelConfig, R0: np.ndarray, builder: Optional[GeneratorBuilder] = None,
                   M: Optional[int] = None) -> np.ndarray:
    """Left null vector of Q_00 + R^(0) Q_10, scaled to sum 1."""
    builder = builder or GeneratorBuilder(cfg)
    boundary = np.array(builder.main(0, M))
    if R0 is not None:
        boundary += R0 @ builder.lower(1)
    basis = linalg.null_space(boundary.T, rcond=1e-10)
    if basis.shape[1] != 1:
        raise IrreducibilityError(
            f"boundary system has null space of dimension {basis.shape[1]}, expected 1"
        )
    x = basis[:, 0]
    x = x / x.sum()
    residual = _inf_norm((x @ boundary).reshape(1, -1)) / max(1.0, _inf_norm(boundary))
    if residual > settings.RESIDUAL_TOL:
        raise ResidualError(f"boundary residual {residual:.3e} too large", residual=residual)
    return x


def propagate_and_normalize(z0: np.ndarray, R: List[np.ndarray], cfg: ModelConfig,
                            mode: Optional[Mode] = None, residual: float = 0.0) -> SteadyState:
    """z(l+1) = z(l) R^(l), then divide by the total mass."""
    mode = mode or cfg.mode
    builder = GeneratorBuilder(cfg, mode)
    z = [np.asarray(z0, dtype=float)]
    for R_level in R:
        z.append(z[-1] @ R_level)
    total = sum(float(zl.sum()) for zl in z)
    if not total > 0:
        raise ConvergenceError("steady-state vector has zero total mass")
    z = [zl / total for zl in z]
    clamped = 0
    for zl in z:
        negative = zl < 0
        if np.any(negative):
            within = negative & (zl >= -settings.CLAMP_TOL)
            clamped += int(within.sum())
            zl[within] = 0.0
            if np.any(zl < 0):
                logger.warning("steady state has entries below %.1e", -settings.CLAMP_TOL)
    if clamped:
        logger.info("clamped %d tiny negative probabilities to 0", clamped)
    M = len(R)
    return SteadyState(
        M=M,
        z=z,
        R=list(R),
        layouts=[builder.layout(level) for level in range(M + 1)],
        mode=mode,
        residual=residual,
        clamped=clamped,
    )


def solve_steady_state(cfg: ModelConfig, M: int, mode: Optional[Mode] = None) -> SteadyState:
    """Matrix-analytic solve at a fixed truncation level."""
    if M < 1:
        raise ConvergenceError(f"truncation level must be >= 1, got {M}")
    mode = mode or cfg.mode
    builder = GeneratorBuilder(cfg, mode)
    R, residual = rate_matrices(cfg, M, builder)
    z0 = boundary_solve(cfg, R[0], builder, M)
    return propagate_and_normalize(z0, R, cfg, mode, residual)


def direct_solve(cfg: ModelConfig, M: int, mode: Optional[Mode] = None,
                 cap: Optional[int] = None) -> SteadyState:
    """Dense oracle: z Q = 0, z e = 1 on the assembled truncated generator."""
    mode = mode or cfg.mode
    Q = assemble_truncated(cfg, M, mode, cap)
    system = Q.T.copy()
    system[-1, :] = 1.0
    rhs = np.zeros(Q.shape[0])
    rhs[-1] = 1.0
    try:
        flat = linalg.solve(system, rhs)
    except linalg.LinAlgError as exc:
        raise IrreducibilityError(f"truncated generator is singular: {exc}") from exc
    residual = _inf_norm((flat @ Q).reshape(1, -1))
    builder = GeneratorBuilder(cfg, mode)
    layouts = [builder.layout(level) for level in range(M + 1)]
    z, start = [], 0
    for lay in layouts:
        z.append(flat[start:start + lay.dim].copy())
        start += lay.dim
    for zl in z:
        zl[(zl < 0) & (zl >= -settings.CLAMP_TOL)] = 0.0
    return SteadyState(M=M, z=z, R=[], layouts=layouts, mode=mode, residual=residual, method="direct")


def global_residual(ss: SteadyState, cfg: ModelConfig) -> float:
    """‖z Q‖∞ reconstructed blockwise."""
    builder = GeneratorBuilder(cfg, ss.mode)
    worst = 0.0
    for level in range(ss.M + 1):
        flow = ss.z[level] @ builder.main(level, ss.M)
        if level > 0:
            flow = flow + ss.z[level - 1] @ builder.upper(level - 1)
        if level < ss.M:
            flow = flow + ss.z[level + 1] @ builder.lower(level + 1)
        worst = max(worst, float(np.abs(flow).max()))
    return worst


def _measure_deltas(cfg: ModelConfig, a: SteadyState, b: SteadyState) -> Dict[str, float]:
    from src.tools.measure_tools import compute_measures

    first, second = compute_measures(a, cfg), compute_measures(b, cfg)
    deltas: Dict[str, float] = {}
    for name, value in first.scalars().items():
        other = second.get(name)
        if value is not None and other is not None:
            deltas[name] = abs(value - other)
    for name in ("P_H", "P_N"):
        deltas[name] = float(np.abs(getattr(first, name) - getattr(second, name)).max())
    return deltas


def choose_truncation(cfg: ModelConfig, eps: Optional[float] = None, m_cap: Optional[int] = None,
                      mode: Optional[Mode] = None, m_min: Optional[int] = None
                      ) -> Tuple[int, SteadyState, TruncationReport]:
    """Smallest M whose measures are stable against M+1 and whose tail mass is below eps."""
    policy = cfg.truncation
    eps = policy.eps if eps is None else eps
    m_cap = policy.m_cap if m_cap is None else m_cap
    M = max(1, policy.m_min if m_min is None else m_min)
    current = solve_steady_state(cfg, M, mode)
    report = TruncationReport(M=M, eps=eps)
    while M <= m_cap:
        following = solve_steady_state(cfg, M + 1, mode)
        deltas = _measure_deltas(cfg, current, following)
        tail = current.tail_mass
        report.tried.append(M)
        report.deltas, report.tail_mass = deltas, tail
        worst = max(deltas.values()) if deltas else 0.0
        logger.debug("M=%d: max measure delta %.3e, tail mass %.3e", M, worst, tail)
        if worst <= eps and tail <= eps:
            report.M = M
            logger.info("truncation level M=%d (max delta %.2e, tail %.2e)", M, worst, tail)
            return M, current, report
        M += 1
        current = following
    raise TruncationError(
        f"no truncation level up to M_cap={m_cap} met eps={eps:g}",
        m_cap=m_cap,
        deltas=report.deltas,
        tail_mass=report.tail_mass,
    )


def solve(cfg: ModelConfig, mode: Optional[Mode] = None) -> Tuple[SteadyState, TruncationReport]:
    """Solve under the config's truncation policy."""
    policy = cfg.truncation
    if policy.is_fixed:
        ss = solve_steady_state(cfg, policy.M, mode)
        return ss, TruncationReport(M=policy.M, tail_mass=ss.tail_mass, eps=policy.eps, tried=[policy.M])
    _, ss, report = choose_truncation(cfg, mode=mode)
    return ss, report


__all__ = [
    "TruncationReport",
    "rate_matrices",
    "boundary_solve",
    "propagate_and_normalize",
    "solve_steady_state",
    "direct_solve",
    "global_residual",
    "choose_truncation",
    "solve",
]
