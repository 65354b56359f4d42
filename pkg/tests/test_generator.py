import itertools

import numpy as np
import pytest

from src.models.stochastic import Mode
from src.tools.generator_tools import (
    GeneratorBuilder,
    assemble_truncated,
    export_triplets,
    truncated_dimension,
)
from src.tools.state_tools import lump_matrix
from src.utils.errors import DimensionCapError, ValidationError

from conftest import hand_chain, scalar_config, two_phase_config

PHASE_GRID = list(itertools.product([1, 2], repeat=4))


class TestExponentialReduction:
    def test_single_channel_chain_matches_hand_assembly(self):
        params = dict(lambda_h=0.4, lambda_n=0.7, mu_h=1.1, mu_n=0.9, leave=0.3, retry=1.2)
        cfg = scalar_config(S=1, **params)
        Q = assemble_truncated(cfg, 2)
        assert Q.shape == (9, 9)
        assert np.abs(Q - hand_chain(M=2, **params)).max() <= 1e-12

    def test_modes_coincide_for_one_retrial_phase(self):
        cfg = scalar_config(S=2)
        ordered = assemble_truncated(cfg, 3, Mode.ORDERED)
        lumped = assemble_truncated(cfg, 3, Mode.LUMPED)
        assert np.abs(ordered - lumped).max() <= 1e-14


class TestConservation:
    @pytest.mark.parametrize("S", [1, 2, 3])
    @pytest.mark.parametrize("L,M_H,M_N,N", PHASE_GRID)
    def test_levels_have_zero_row_sums(self, S, L, M_H, M_N, N):
        cfg = two_phase_config(L, M_H, M_N, N, S=S, M=4)
        builder = GeneratorBuilder(cfg, max_levels=5)
        for level in range(5):
            blocks = builder.blocks(level, truncation_level=4)
            assert np.abs(blocks.row_sums()).max() <= 1e-9

    def test_assembled_generator_is_conservative(self, baseline):
        Q = assemble_truncated(baseline, 4)
        assert Q.shape[0] == truncated_dimension(baseline, 4)
        assert np.abs(Q.sum(axis=1)).max() <= 1e-9
        off = Q - np.diag(np.diag(Q))
        assert off.min() >= 0.0

    def test_blocks_outside_truncation_are_open(self, baseline):
        builder = GeneratorBuilder(baseline)
        balance = builder.main(2).sum(axis=1) + builder.upper(2).sum(axis=1) + builder.lower(2).sum(axis=1)
        assert np.abs(balance).max() <= 1e-9
        assert builder.blocks(3, truncation_level=3).up is None

    def test_closed_level_keeps_the_phase_change_of_lost_calls(self):
        cfg = two_phase_config(L=2, M_H=2, M_N=2, N=2, S=2, M=3)
        builder = GeneratorBuilder(cfg, max_levels=5)
        lay = builder.layout(3)
        r = lay.segment_slice(2, 2)
        _, h, n, _ = lay.factor_dims(2, 2)
        added = builder.main(3, 3)[r, r] - builder.main(3)[r, r]
        assert np.abs(added - np.kron(cfg.mmap.C_N, np.eye(h * n * lay.orbit_dim))).max() <= 1e-14


class TestExactLumping:
    @pytest.mark.parametrize("level", [0, 1, 2])
    def test_block_compatibility(self, baseline, level):
        M = 3
        ordered = GeneratorBuilder(baseline, Mode.ORDERED, max_levels=M + 1)
        lumped = GeneratorBuilder(baseline, Mode.LUMPED, max_levels=M + 1)
        V, V_up = lump_matrix(level, baseline), lump_matrix(level + 1, baseline)
        assert np.abs(ordered.main(level, M) @ V - V @ lumped.main(level, M)).max() <= 1e-10
        assert np.abs(ordered.upper(level) @ V_up - V @ lumped.upper(level)).max() <= 1e-10
        assert np.abs(ordered.lower(level + 1) @ V - V_up @ lumped.lower(level + 1)).max() <= 1e-10

    def test_closed_top_level_compatibility(self, baseline):
        M = 3
        V = lump_matrix(M, baseline)
        ordered = GeneratorBuilder(baseline, Mode.ORDERED).main(M, M)
        lumped = GeneratorBuilder(baseline, Mode.LUMPED).main(M, M)
        assert np.abs(ordered @ V - V @ lumped).max() <= 1e-10


class TestCaps:
    def test_dense_cap(self, baseline):
        with pytest.raises(DimensionCapError):
            assemble_truncated(baseline, 4, cap=100)

    def test_truncation_level_must_be_positive(self, baseline):
        with pytest.raises(ValidationError):
            assemble_truncated(baseline, 0)


def test_export_triplets(tmp_path, baseline):
    block = GeneratorBuilder(baseline).upper(1)
    path = tmp_path / "up_1.txt"
    count = export_triplets(block, path, header="# config_sha256=abc")
    lines = path.read_text().splitlines()
    assert lines[0] == "# config_sha256=abc"
    assert len(lines) == count + 1
    assert count == np.count_nonzero(block)
    row, col, value = lines[1].split()
    assert block[int(row), int(col)] == pytest.approx(float(value), rel=1e-15)
