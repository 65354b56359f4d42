"""Level-dependent QBD generator blocks.

Q_{l,l+1} (up), Q_{l,l} (main) and Q_{l+1,l} (down) are assembled segment by
segment from the Kronecker operators. At the truncation level M a
blocked new call is lost but its arrival still moves the MMAP phase, and
preemption stays inside level M with the victim lost, so the truncated matrix
is an exact generator.
"""

import logging
import threading
from collections import OrderedDict
from typing import Dict, Optional, Tuple

import numpy as np
from scipy import sparse

from src.models.results import LevelBlocks
from src.models.state import LevelLayout
from src.models.stochastic import Mode, ModelConfig
from src.tools import kron_tools
from src.tools.kron_tools import check_cap, kron_chain, kron_sum_chain
from src.tools.state_tools import build_layout, orbit_algebra
from src.config import settings
from src.utils.errors import DimensionCapError, ValidationError

logger = logging.getLogger(__name__)


class GeneratorBuilder:
    """Builds and caches generator blocks for one configuration and orbit mode.

    The block cache keeps the most recent ``max_levels`` levels; insertion is
    serialized so distinct levels may be built from several threads.
    """

    def __init__(self, cfg: ModelConfig, mode: Optional[Mode] = None, max_levels: int = 3):
        self.cfg = cfg
        self.mode = mode or cfg.mode
        self.orbit = orbit_algebra(cfg, self.mode)
        self.max_levels = max_levels
        self._blocks: "OrderedDict[Tuple[str, int, Optional[int]], np.ndarray]" = OrderedDict()
        self._lock = threading.Lock()
        m = cfg.mmap
        self._eye_cache: Dict[int, np.ndarray] = {}
        self._c0_full = m.C0 + m.C_H

    def layout(self, level: int) -> LevelLayout:
        return build_layout(self.cfg, level, self.mode)

    def _eye(self, n: int) -> np.ndarray:
        eye = self._eye_cache.get(n)
        if eye is None:
            eye = np.eye(n)
            self._eye_cache[n] = eye
        return eye

    def _allocate(self, rows: LevelLayout, cols: LevelLayout, level: int) -> np.ndarray:
        try:
            check_cap(rows.dim, cols.dim, level=level)
        except DimensionCapError:
            logger.error("Block at level %d would be %dx%d", level, rows.dim, cols.dim)
            raise
        return np.zeros((rows.dim, cols.dim))

    def _get(self, key: Tuple[str, int, Optional[int]], build) -> np.ndarray:
        with self._lock:
            cached = self._blocks.get(key)
            if cached is not None:
                self._blocks.move_to_end(key)
                return cached
        block = build()
        block.setflags(write=False)
        with self._lock:
            self._blocks[key] = block
            while len(self._blocks) > 3 * self.max_levels:
                self._blocks.popitem(last=False)
        return block

    # Upper diagonal

    def upper(self, level: int) -> np.ndarray:
        return self._get(("up", level, None), lambda: self._build_upper(level))

    def _build_upper(self, level: int) -> np.ndarray:
        cfg, S = self.cfg, self.cfg.S
        rows, cols = self.layout(level), self.layout(level + 1)
        Q = self._allocate(rows, cols, level)
        join = self.orbit.join(level)
        sh, sn = cfg.service_h, cfg.service_n
        for j in range(S + 1):
            _, h, n, _ = rows.factor_dims(S, j)
            r = rows.segment_slice(S, j)
            Q[r, cols.segment_slice(S, j)] = kron_chain(cfg.mmap.C_N, self._eye(h * n), join)
            if j < S:
                Q[r, cols.segment_slice(S, j + 1)] = kron_chain(
                    cfg.mmap.C_H,
                    self._eye(h),
                    sh.beta.reshape(1, -1),
                    self._eye(sn.M ** (S - j - 1)),
                    np.ones((sn.M, 1)),
                    join,
                )
        return Q

    # Lower diagonal

    def lower(self, level_plus_1: int) -> np.ndarray:
        """Q_{l+1,l}: rows on level ``level_plus_1``, columns one level below."""
        return self._get(("down", level_plus_1, None), lambda: self._build_lower(level_plus_1))

    def _build_lower(self, level_plus_1: int) -> np.ndarray:
        cfg, S = self.cfg, self.cfg.S
        rows, cols = self.layout(level_plus_1), self.layout(level_plus_1 - 1)
        Q = self._allocate(rows, cols, level_plus_1)
        leave = self.orbit.leave(level_plus_1)
        success = self.orbit.success(level_plus_1, cfg.service_n)
        for kappa, j in rows.segments:
            L, h, n, _ = rows.factor_dims(kappa, j)
            r = rows.segment_slice(kappa, j)
            Q[r, cols.segment_slice(kappa, j)] = np.kron(self._eye(L * h * n), leave)
            if kappa < S:
                Q[r, cols.segment_slice(kappa + 1, j)] = np.kron(self._eye(L * h * n), success)
        return Q

    # Main diagonal

    def main(self, level: int, truncation_level: Optional[int] = None) -> np.ndarray:
        closed = truncation_level is not None and level == truncation_level
        key = ("main", level, truncation_level if closed else None)
        return self._get(key, lambda: self._build_main(level, closed))

    def _build_main(self, level: int, closed: bool) -> np.ndarray:
        cfg, S = self.cfg, self.cfg.S
        m, sh, sn = cfg.mmap, cfg.service_h, cfg.service_n
        lay = self.layout(level)
        Q = self._allocate(lay, lay, level)
        W = lay.orbit_dim
        psi_orbit = self.orbit.internal(level)
        psi_failed = self.orbit.failed(level) if level > 0 else None
        I_W = self._eye(W)
        for kappa, j in lay.segments:
            L, h, n, _ = lay.factor_dims(kappa, j)
            r = lay.segment_slice(kappa, j)
            arrivals = self._c0_full if (kappa == S and j == S) else m.C0
            diagonal = kron_sum_chain(
                arrivals,
                kron_tools.psi_service(sh, j),
                kron_tools.psi_service(sn, kappa - j),
                psi_orbit,
            )
            if kappa == S and psi_failed is not None:
                diagonal = diagonal + np.kron(self._eye(L * h * n), psi_failed)
            Q[r, r] += diagonal
            if kappa < S:
                Q[r, lay.segment_slice(kappa + 1, j)] = kron_chain(
                    m.C_N, self._eye(h * n), sn.beta.reshape(1, -1), I_W
                )
                Q[r, lay.segment_slice(kappa + 1, j + 1)] = kron_chain(
                    m.C_H, self._eye(h), sh.beta.reshape(1, -1), self._eye(n * W)
                )
            if j < kappa:
                Q[r, lay.segment_slice(kappa - 1, j)] = kron_chain(
                    self._eye(L * h), kron_tools.phi_service(sn, kappa - j), I_W
                )
            if j >= 1:
                Q[r, lay.segment_slice(kappa - 1, j - 1)] = kron_chain(
                    self._eye(L), kron_tools.phi_service(sh, j), self._eye(n * W)
                )
        if closed:
            self._close_level(Q, lay)
        return Q

    def _close_level(self, Q: np.ndarray, lay: LevelLayout) -> None:
        """Blocked new calls are lost with the MMAP phase change kept; preemption leaves the orbit as is."""
        cfg, S = self.cfg, self.cfg.S
        sh, sn = cfg.service_h, cfg.service_n
        W = lay.orbit_dim
        for j in range(S + 1):
            L, h, n, _ = lay.factor_dims(S, j)
            r = lay.segment_slice(S, j)
            Q[r, r] += np.kron(cfg.mmap.C_N, self._eye(h * n * W))
            if j < S:
                Q[r, lay.segment_slice(S, j + 1)] += kron_chain(
                    cfg.mmap.C_H,
                    self._eye(h),
                    sh.beta.reshape(1, -1),
                    self._eye(sn.M ** (S - j - 1)),
                    np.ones((sn.M, 1)),
                    self._eye(W),
                )

    def blocks(self, level: int, truncation_level: Optional[int] = None) -> LevelBlocks:
        closed = truncation_level is not None and level == truncation_level
        return LevelBlocks(
            level=level,
            main=self.main(level, truncation_level),
            up=None if closed else self.upper(level),
            down=self.lower(level) if level > 0 else None,
            layout=self.layout(level),
        )


def build_upper(level: int, cfg: ModelConfig, mode: Optional[Mode] = None) -> np.ndarray:
    return GeneratorBuilder(cfg, mode).upper(level)


def build_lower(level_plus_1: int, cfg: ModelConfig, mode: Optional[Mode] = None) -> np.ndarray:
    return GeneratorBuilder(cfg, mode).lower(level_plus_1)


def build_main(level: int, cfg: ModelConfig, mode: Optional[Mode] = None,
               truncation_level: Optional[int] = None) -> np.ndarray:
    return GeneratorBuilder(cfg, mode).main(level, truncation_level)


def truncated_dimension(cfg: ModelConfig, M: int, mode: Optional[Mode] = None) -> int:
    return sum(build_layout(cfg, level, mode).dim for level in range(M + 1))


def assemble_truncated(cfg: ModelConfig, M: int, mode: Optional[Mode] = None,
                       cap: Optional[int] = None) -> np.ndarray:
    """Dense generator on levels 0..M."""
    if M < 1:
        raise ValidationError(f"truncation level must be >= 1, got {M}")
    limit = settings.DENSE_CAP if cap is None else cap
    total = truncated_dimension(cfg, M, mode)
    if total > limit:
        raise DimensionCapError(
            f"truncated generator has {total} states, dense cap is {limit}", dimension=total, cap=limit, level=M
        )
    builder = GeneratorBuilder(cfg, mode, max_levels=M + 1)
    offsets = np.cumsum([0] + [builder.layout(level).dim for level in range(M + 1)])
    Q = np.zeros((total, total))
    for level in range(M + 1):
        a, b = offsets[level], offsets[level + 1]
        Q[a:b, a:b] = builder.main(level, M)
        if level < M:
            Q[a:b, b:offsets[level + 2]] = builder.upper(level)
            Q[b:offsets[level + 2], a:b] = builder.lower(level + 1)
    return Q


def export_triplets(block: np.ndarray, path, header: Optional[str] = None) -> int:
    """Write nonzeros as ``row col value`` lines with 17 significant digits."""
    coo = sparse.coo_matrix(block)
    with open(path, "w", encoding="utf-8") as handle:
        if header:
            handle.write(header if header.endswith("\n") else header + "\n")
        for i, j, value in zip(coo.row, coo.col, coo.data):
            handle.write(f"{i} {j} {value:.17g}\n")
    return int(coo.nnz)


__all__ = [
    "GeneratorBuilder",
    "build_upper",
    "build_lower",
    "build_main",
    "truncated_dimension",
    "assemble_truncated",
    "export_triplets",
]
