"""Kronecker products, sums and the composite service/orbit operators.

Empty constructs (zero servers, empty orbit) are 1x1 zero matrices so block
formulas specialise without case splits. Every result is checked against the
per-block entry cap before it is allocated. Cached results are read-only.
"""

import functools
import logging
from typing import Optional

import numpy as np

from src.config import settings
from src.models.stochastic import PhaseType, RetrialPH
from src.utils.errors import DimensionCapError, ValidationError

logger = logging.getLogger(__name__)

ZERO_1X1 = np.zeros((1, 1))
ZERO_1X1.setflags(write=False)


def check_cap(rows: int, cols: int, cap: Optional[int] = None, level: Optional[int] = None) -> None:
    limit = settings.DIMENSION_CAP if cap is None else cap
    if rows * cols > limit:
        where = f" at level {level}" if level is not None else ""
        raise DimensionCapError(
            f"matrix of {rows}x{cols} = {rows * cols} entries{where} exceeds cap {limit}",
            dimension=rows * cols,
            cap=limit,
            level=level,
        )


def _readonly(matrix: np.ndarray) -> np.ndarray:
    matrix.setflags(write=False)
    return matrix


def identity(n: int) -> np.ndarray:
    return np.eye(n)


def kron_product(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    check_cap(A.shape[0] * B.shape[0], A.shape[1] * B.shape[1])
    return np.kron(A, B)


def kron_chain(*factors: np.ndarray) -> np.ndarray:
    """Left-to-right Kronecker product of all factors."""
    result = np.ones((1, 1))
    for factor in factors:
        result = kron_product(result, factor)
    return result


def kron_sum(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """A ⊗ I + I ⊗ B for square A, B."""
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    if A.shape[0] != A.shape[1] or B.shape[0] != B.shape[1]:
        raise ValidationError(f"Kronecker sum needs square inputs, got {A.shape} and {B.shape}")
    n, m = A.shape[0], B.shape[0]
    check_cap(n * m, n * m)
    return np.kron(A, np.eye(m)) + np.kron(np.eye(n), B)


def kron_sum_chain(*terms: np.ndarray) -> np.ndarray:
    result = ZERO_1X1
    for term in terms:
        result = kron_sum(result, term)
    return result


def _k_fold_sum(A: np.ndarray, k: int) -> np.ndarray:
    if k < 0:
        raise ValidationError(f"arity must be >= 0, got {k}")
    if k == 0:
        return ZERO_1X1
    result = np.array(A)
    for _ in range(k - 1):
        result = kron_sum(result, A)
    return _readonly(result)


def _position_sum(exit_column: np.ndarray, alphabet: int, k: int) -> np.ndarray:
    """Σ_y I_{a^y} ⊗ exit ⊗ I_{a^(k-1-y)}, dims a^k x a^(k-1)."""
    if k < 1:
        raise ValidationError(f"arity must be >= 1, got {k}")
    rows, cols = alphabet ** k, alphabet ** (k - 1)
    check_cap(rows, cols)
    column = np.asarray(exit_column, dtype=float).reshape(-1, 1)
    result = np.zeros((rows, cols))
    for y in range(k):
        result += np.kron(np.kron(np.eye(alphabet ** y), column), np.eye(alphabet ** (k - 1 - y)))
    return _readonly(result)


@functools.lru_cache(maxsize=256)
def psi_service(p: PhaseType, k: int) -> np.ndarray:
    """k-fold Kronecker sum of A (phase evolution of k calls in service)."""
    return _k_fold_sum(p.A, k)


@functools.lru_cache(maxsize=256)
def phi_service(p: PhaseType, k: int) -> np.ndarray:
    """Completion of one of k services, dims M^k x M^(k-1)."""
    return _position_sum(p.A0, p.M, k)


@functools.lru_cache(maxsize=256)
def psi_orbit(r: RetrialPH, l: int) -> np.ndarray:
    """l-fold Kronecker sum of Gamma."""
    return _k_fold_sum(r.Gamma, l)


@functools.lru_cache(maxsize=256)
def psi_orbit_failed(r: RetrialPH, l: int) -> np.ndarray:
    """l-fold Kronecker sum of exit_retry·gamma (failed retry restarts at gamma)."""
    return _k_fold_sum(np.outer(r.exit_retry, r.gamma), l)


@functools.lru_cache(maxsize=256)
def phi_orbit_leave(r: RetrialPH, l_plus_1: int) -> np.ndarray:
    """One of l+1 orbit customers abandons, dims N^(l+1) x N^l."""
    return _position_sum(r.exit_leave, r.N, l_plus_1)


@functools.lru_cache(maxsize=256)
def phi_orbit_retry(r: RetrialPH, l_plus_1: int) -> np.ndarray:
    """One of l+1 orbit customers fires its retry exit, dims N^(l+1) x N^l."""
    return _position_sum(r.exit_retry, r.N, l_plus_1)


@functools.lru_cache(maxsize=256)
def phi_orbit_success(r: RetrialPH, l_plus_1: int, beta_n: PhaseType) -> np.ndarray:
    """Successful retry: beta_N ⊗ Φ_retry, dims N^(l+1) x (M_N·N^l).

    Columns are ordered (new service phase, remaining orbit) so the started
    service lands on the last s_N position of the target segment.
    """
    retry = phi_orbit_retry(r, l_plus_1)
    check_cap(retry.shape[0], retry.shape[1] * beta_n.M)
    return _readonly(np.kron(beta_n.beta.reshape(1, -1), retry))


@functools.lru_cache(maxsize=256)
def orbit_join(r: RetrialPH, l: int) -> np.ndarray:
    """A customer joins an orbit of l in phase ~gamma, appended last: I_{N^l} ⊗ gamma."""
    check_cap(r.N ** l, r.N ** (l + 1))
    return _readonly(np.kron(np.eye(r.N ** l), r.gamma.reshape(1, -1)))


def clear_caches() -> None:
    for fn in (psi_service, phi_service, psi_orbit, psi_orbit_failed,
               phi_orbit_leave, phi_orbit_retry, phi_orbit_success, orbit_join):
        fn.cache_clear()
    logger.debug("Kronecker operator caches cleared")


__all__ = [
    "check_cap",
    "identity",
    "kron_product",
    "kron_chain",
    "kron_sum",
    "kron_sum_chain",
    "psi_service",
    "phi_service",
    "psi_orbit",
    "psi_orbit_failed",
    "phi_orbit_leave",
    "phi_orbit_retry",
    "phi_orbit_success",
    "orbit_join",
    "clear_caches",
]
