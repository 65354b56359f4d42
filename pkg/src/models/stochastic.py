"""Stochastic ingredients of the retrial model.

Holds the marked Markovian arrival process (new and handoff calls), the two
phase-type service laws, the phase-type retrial law with its two exits, and the
``ModelConfig`` that groups them with the channel count and truncation policy.
All objects are immutable once built; their arrays are read-only copies.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy import linalg
from scipy.sparse.csgraph import connected_components

from src.config import settings
from src.utils.errors import IrreducibilityError, ValidationError


def _frozen_array(values: Any, ndim: int, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if ndim == 2 and arr.ndim == 1 and arr.size == 1:
        arr = arr.reshape(1, 1)
    if arr.ndim != ndim:
        raise ValidationError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} has non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Violation:
    """One broken invariant, located by component and matrix coordinates."""

    component: str
    message: str
    location: Optional[Tuple[int, ...]] = None

    def __str__(self) -> str:
        where = f" at {self.location}" if self.location is not None else ""
        return f"{self.component}: {self.message}{where}"


class Mode(Enum):
    """Orbit representation used when enumerating levels."""

    ORDERED = "ordered"
    LUMPED = "lumped"


class CallClass(Enum):
    HANDOFF = "H"
    NEW = "N"


@dataclass(frozen=True, eq=False)
class MarkedMAP:
    """Arrival process given by (C0, C_N, C_H)."""

    C0: np.ndarray
    C_N: np.ndarray
    C_H: np.ndarray
    row_sum_tol: float = settings.ROW_SUM_TOL

    def __post_init__(self):
        for name in ("C0", "C_N", "C_H"):
            object.__setattr__(self, name, _frozen_array(getattr(self, name), 2, name))
        L = self.C0.shape[0]
        for name in ("C0", "C_N", "C_H"):
            if getattr(self, name).shape != (L, L):
                raise ValidationError(f"{name} must be {L}x{L}, got {getattr(self, name).shape}")

    @property
    def L(self) -> int:
        return self.C0.shape[0]

    @property
    def generator(self) -> np.ndarray:
        return self.C0 + self.C_N + self.C_H

    def violations(self) -> List[Violation]:
        found: List[Violation] = []
        off = self.C0 - np.diag(np.diag(self.C0))
        for i, j in zip(*np.nonzero(off < 0)):
            found.append(Violation("mmap.C0", f"negative off-diagonal {off[i, j]:.6g}", (int(i), int(j))))
        for i in np.nonzero(np.diag(self.C0) >= 0)[0]:
            found.append(Violation("mmap.C0", f"diagonal {self.C0[i, i]:.6g} is not strictly negative", (int(i), int(i))))
        for name in ("C_N", "C_H"):
            mat = getattr(self, name)
            for i, j in zip(*np.nonzero(mat < 0)):
                found.append(Violation(f"mmap.{name}", f"negative rate {mat[i, j]:.6g}", (int(i), int(j))))
        sums = self.generator.sum(axis=1)
        for i in np.nonzero(np.abs(sums) > self.row_sum_tol)[0]:
            found.append(Violation(
                "mmap.C",
                f"row sum {sums[i]:+.6g} exceeds tolerance {self.row_sum_tol:g}",
                (int(i),),
            ))
        if not found:
            classes = communicating_classes(self.generator)
            if len(classes) > 1:
                found.append(Violation("mmap.C", f"reducible generator, communicating classes {classes}"))
        return found

    def renormalized(self) -> "MarkedMAP":
        """Rebalance the C0 diagonal so every row of C sums to exactly zero."""
        C0 = np.array(self.C0)
        off = C0 - np.diag(np.diag(C0))
        outflow = off.sum(axis=1) + self.C_N.sum(axis=1) + self.C_H.sum(axis=1)
        np.fill_diagonal(C0, -outflow)
        return MarkedMAP(C0, self.C_N, self.C_H, row_sum_tol=self.row_sum_tol)

    def scaled_class(self, call_class: CallClass, factor: float) -> "MarkedMAP":
        """Scale one marked matrix by ``factor`` and compensate on the C0 diagonal."""
        if factor < 0:
            raise ValidationError(f"scaling factor must be nonnegative, got {factor}")
        C_N, C_H = np.array(self.C_N), np.array(self.C_H)
        if call_class is CallClass.HANDOFF:
            delta = (factor - 1.0) * C_H.sum(axis=1)
            C_H = factor * C_H
        else:
            delta = (factor - 1.0) * C_N.sum(axis=1)
            C_N = factor * C_N
        C0 = np.array(self.C0) - np.diag(delta)
        return MarkedMAP(C0, C_N, C_H, row_sum_tol=self.row_sum_tol)

    def with_class_rate(self, call_class: CallClass, target: float, tol: float = 1e-9) -> "MarkedMAP":
        """Rescale one class so its fundamental rate hits ``target`` (bisection on the factor)."""
        if target < 0:
            raise ValidationError(f"target rate must be nonnegative, got {target}")
        if target == 0:
            return self.scaled_class(call_class, 0.0)

        def rate(factor: float) -> float:
            lam_h, lam_n, _ = fundamental_rates(self.scaled_class(call_class, factor))
            return lam_h if call_class is CallClass.HANDOFF else lam_n

        base = rate(1.0)
        if base <= 0:
            raise ValidationError(f"class {call_class.value} has zero rate and cannot be rescaled")
        lo, hi = 0.0, max(2.0 * target / base, 1e-12)
        while rate(hi) < target:
            lo, hi = hi, 2.0 * hi
            if hi > 1e12:
                raise ValidationError(f"cannot reach class {call_class.value} rate {target}")
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            value = rate(mid)
            if abs(value - target) <= tol:
                return self.scaled_class(call_class, mid)
            if value < target:
                lo = mid
            else:
                hi = mid
        return self.scaled_class(call_class, 0.5 * (lo + hi))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "C0": self.C0.tolist(),
            "C_N": self.C_N.tolist(),
            "C_H": self.C_H.tolist(),
            "row_sum_tol": self.row_sum_tol,
        }


@dataclass(frozen=True, eq=False)
class PhaseType:
    """Service law (beta, A); the exit vector is derived as -A e."""

    beta: np.ndarray
    A: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "beta", _frozen_array(self.beta, 1, "beta"))
        object.__setattr__(self, "A", _frozen_array(self.A, 2, "A"))
        if self.A.shape != (self.beta.size, self.beta.size):
            raise ValidationError(f"A must be {self.beta.size}x{self.beta.size}, got {self.A.shape}")
        exit_vector = -self.A.sum(axis=1)
        exit_vector.setflags(write=False)
        object.__setattr__(self, "A0", exit_vector)

    @property
    def M(self) -> int:
        return self.beta.size

    @property
    def mean_rate(self) -> float:
        return ph_mean_rate(self)

    def violations(self, component: str = "service") -> List[Violation]:
        found: List[Violation] = []
        tol = settings.PROB_TOL
        for i in np.nonzero(self.beta < 0)[0]:
            found.append(Violation(f"{component}.beta", f"negative entry {self.beta[i]:.6g}", (int(i),)))
        total = float(self.beta.sum())
        if abs(total - 1.0) > tol:
            found.append(Violation(f"{component}.beta", f"beta row sum {total:.6g} ≠ 1"))
        found.extend(_subgenerator_violations(self.A, f"{component}.A"))
        for i in np.nonzero(self.A0 < -tol)[0]:
            found.append(Violation(f"{component}.A", f"row {i} sums to {-self.A0[i]:+.6g} > 0", (int(i),)))
        return found

    def scaled_to_rate(self, mu: float) -> "PhaseType":
        """Rescale A so the mean service rate equals ``mu``."""
        if mu <= 0:
            raise ValidationError(f"service rate must be positive, got {mu}")
        return PhaseType(self.beta, self.A * (mu / self.mean_rate))

    def to_dict(self) -> Dict[str, Any]:
        return {"beta": self.beta.tolist(), "A": self.A.tolist()}


@dataclass(frozen=True, eq=False)
class RetrialPH:
    """Retrial law (gamma, Gamma) with abandonment and retry exit vectors."""

    gamma: np.ndarray
    Gamma: np.ndarray
    exit_leave: np.ndarray
    exit_retry: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "gamma", _frozen_array(self.gamma, 1, "gamma"))
        object.__setattr__(self, "Gamma", _frozen_array(self.Gamma, 2, "Gamma"))
        object.__setattr__(self, "exit_leave", _frozen_array(self.exit_leave, 1, "exit_leave"))
        object.__setattr__(self, "exit_retry", _frozen_array(self.exit_retry, 1, "exit_retry"))
        n = self.gamma.size
        if self.Gamma.shape != (n, n):
            raise ValidationError(f"Gamma must be {n}x{n}, got {self.Gamma.shape}")
        for name in ("exit_leave", "exit_retry"):
            if getattr(self, name).size != n:
                raise ValidationError(f"{name} must have {n} entries")

    @property
    def N(self) -> int:
        return self.gamma.size

    @property
    def mean_rate(self) -> float:
        return retrial_mean_rate(self)

    def violations(self) -> List[Violation]:
        found: List[Violation] = []
        tol = settings.PROB_TOL
        for i in np.nonzero(self.gamma < 0)[0]:
            found.append(Violation("retrial.gamma", f"negative entry {self.gamma[i]:.6g}", (int(i),)))
        total = float(self.gamma.sum())
        if abs(total - 1.0) > tol:
            found.append(Violation("retrial.gamma", f"gamma row sum {total:.6g} ≠ 1"))
        for name in ("exit_leave", "exit_retry"):
            vec = getattr(self, name)
            for i in np.nonzero(vec < 0)[0]:
                found.append(Violation(f"retrial.{name}", f"negative rate {vec[i]:.6g}", (int(i),)))
        found.extend(_subgenerator_violations(self.Gamma, "retrial.Gamma"))
        balance = self.Gamma.sum(axis=1) + self.exit_leave + self.exit_retry
        for i in np.nonzero(np.abs(balance) > tol)[0]:
            found.append(Violation(
                "retrial.Gamma",
                f"Gamma e + exits = {balance[i]:+.6g} in row {i}, expected 0",
                (int(i),),
            ))
        return found

    def scaled_to_rate(self, theta: float) -> "RetrialPH":
        """Rescale Gamma and both exits so the mean retrial rate equals ``theta``."""
        if theta <= 0:
            raise ValidationError(f"retrial rate must be positive, got {theta}")
        factor = theta / self.mean_rate
        return RetrialPH(self.gamma, self.Gamma * factor, self.exit_leave * factor, self.exit_retry * factor)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "gamma": self.gamma.tolist(),
            "Gamma": self.Gamma.tolist(),
            "exit_leave": self.exit_leave.tolist(),
            "exit_retry": self.exit_retry.tolist(),
        }


@dataclass(frozen=True)
class TruncationPolicy:
    """Either a fixed orbit cap ``M`` or an eps-driven search up to ``m_cap``."""

    M: Optional[int] = None
    eps: float = settings.TRUNC_EPS
    m_cap: int = settings.M_CAP
    m_min: int = settings.M_MIN

    def __post_init__(self):
        if self.M is not None and self.M < 1:
            raise ValidationError(f"truncation level must be >= 1, got {self.M}")
        if self.eps <= 0:
            raise ValidationError(f"truncation eps must be positive, got {self.eps}")
        if self.m_cap < 1 or self.m_min < 1:
            raise ValidationError("m_cap and m_min must be >= 1")

    @classmethod
    def fixed(cls, M: int) -> "TruncationPolicy":
        return cls(M=M)

    @classmethod
    def adaptive(cls, eps: float = settings.TRUNC_EPS, m_cap: int = settings.M_CAP) -> "TruncationPolicy":
        return cls(M=None, eps=eps, m_cap=m_cap)

    @property
    def is_fixed(self) -> bool:
        return self.M is not None

    def to_dict(self) -> Dict[str, Any]:
        if self.is_fixed:
            return {"M": self.M}
        return {"eps": self.eps, "m_cap": self.m_cap, "m_min": self.m_min}


@dataclass(frozen=True, eq=False)
class ModelConfig:
    """Complete model: arrivals, two service laws, retrial law, S channels."""

    mmap: MarkedMAP
    service_h: PhaseType
    service_n: PhaseType
    retrial: RetrialPH
    S: int
    truncation: TruncationPolicy = field(default_factory=TruncationPolicy)
    mode: Mode = Mode.LUMPED
    name: str = "custom"

    def validate(self) -> List[Violation]:
        return validate(self)

    def validated(self) -> "ModelConfig":
        report = self.validate()
        if report:
            raise ValidationError(
                f"configuration '{self.name}' has {len(report)} violation(s): " + "; ".join(map(str, report)),
                violations=report,
            )
        return self

    def replace(self, **changes: Any) -> "ModelConfig":
        return dataclasses.replace(self, **changes)

    @property
    def lambda_h(self) -> float:
        return fundamental_rates(self.mmap)[0]

    @property
    def lambda_n(self) -> float:
        return fundamental_rates(self.mmap)[1]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "mmap": self.mmap.to_dict(),
            "service_h": self.service_h.to_dict(),
            "service_n": self.service_n.to_dict(),
            "retrial": self.retrial.to_dict(),
            "system": {
                "S": self.S,
                "mode": self.mode.value,
                "truncation": self.truncation.to_dict(),
            },
        }


def _subgenerator_violations(A: np.ndarray, component: str) -> List[Violation]:
    found: List[Violation] = []
    off = A - np.diag(np.diag(A))
    for i, j in zip(*np.nonzero(off < 0)):
        found.append(Violation(component, f"negative off-diagonal {off[i, j]:.6g}", (int(i), int(j))))
    for i in np.nonzero(np.diag(A) >= 0)[0]:
        found.append(Violation(component, f"diagonal {A[i, i]:.6g} is not strictly negative", (int(i), int(i))))
    if not found:
        eigenvalues = np.linalg.eigvals(A)
        if np.any(eigenvalues.real >= 0):
            found.append(Violation(component, "not invertible: an eigenvalue has nonnegative real part"))
    return found


def communicating_classes(C: np.ndarray) -> List[List[int]]:
    """Strongly connected components of the transition graph of generator C."""
    adjacency = (np.abs(C - np.diag(np.diag(C))) > 0).astype(int)
    count, labels = connected_components(adjacency, directed=True, connection="strong")
    return [sorted(int(i) for i in np.nonzero(labels == k)[0]) for k in range(count)]


def stationary_vector(m: MarkedMAP) -> np.ndarray:
    """Solve pi C = 0, pi e = 1 by LU on the bordered system."""
    C = m.generator
    classes = communicating_classes(C)
    if len(classes) > 1:
        raise IrreducibilityError(f"MMAP generator is reducible: classes {classes}", classes=classes)
    L = m.L
    if L == 1:
        return np.ones(1)
    system = C.T.copy()
    system[-1, :] = 1.0
    rhs = np.zeros(L)
    rhs[-1] = 1.0
    try:
        pi = linalg.solve(system, rhs)
    except linalg.LinAlgError as exc:
        raise IrreducibilityError(f"MMAP generator is singular: {exc}", classes=classes) from exc
    return pi


def fundamental_rates(m: MarkedMAP) -> Tuple[float, float, float]:
    """Return (lambda_H, lambda_N, lambda)."""
    pi = stationary_vector(m)
    lam_h = float(pi @ m.C_H.sum(axis=1))
    lam_n = float(pi @ m.C_N.sum(axis=1))
    return lam_h, lam_n, lam_h + lam_n


def _mean_absorption_time(initial: np.ndarray, sub_generator: np.ndarray, label: str) -> float:
    try:
        times = linalg.solve(sub_generator, np.ones(sub_generator.shape[0]))
    except linalg.LinAlgError as exc:
        raise ValidationError(f"{label} sub-generator is singular") from exc
    mean = float(-initial @ times)
    if not mean > 0:
        raise ValidationError(f"{label} mean absorption time {mean} is not positive")
    return mean


def ph_mean_rate(p: PhaseType) -> float:
    """mu = 1 / (-beta A^-1 e)."""
    return 1.0 / _mean_absorption_time(p.beta, p.A, "service")


def retrial_mean_rate(r: RetrialPH) -> float:
    """theta = 1 / (-gamma Gamma^-1 e)."""
    return 1.0 / _mean_absorption_time(r.gamma, r.Gamma, "retrial")


def validate(cfg: ModelConfig) -> List[Violation]:
    """Every violated invariant of ``cfg``; empty iff admissible."""
    report: List[Violation] = []
    if cfg.S < 1:
        report.append(Violation("system.S", f"channel count {cfg.S} must be >= 1"))
    report.extend(cfg.mmap.violations())
    report.extend(cfg.service_h.violations("service_h"))
    report.extend(cfg.service_n.violations("service_n"))
    report.extend(cfg.retrial.violations())
    return report


__all__ = [
    "Violation",
    "Mode",
    "CallClass",
    "MarkedMAP",
    "PhaseType",
    "RetrialPH",
    "TruncationPolicy",
    "ModelConfig",
    "communicating_classes",
    "stationary_vector",
    "fundamental_rates",
    "ph_mean_rate",
    "retrial_mean_rate",
    "validate",
]
