from math import comb

import numpy as np
import pytest

from src.models.state import StateCoord
from src.models.stochastic import Mode
from src.tools.state_tools import (
    build_layout,
    decode,
    encode,
    enumerate_states,
    lump_matrix,
    occupancy_vectors,
    orbit_dim,
    orbit_lump_matrix,
)
from src.utils.errors import ValidationError

from conftest import two_phase_config


class TestOccupancy:
    def test_colex_order(self):
        assert occupancy_vectors(2, 2) == ((2, 0), (1, 1), (0, 2))

    @pytest.mark.parametrize("N,l", [(1, 4), (2, 3), (3, 4)])
    def test_count_is_multiset_number(self, N, l):
        assert len(occupancy_vectors(N, l)) == comb(l + N - 1, N - 1) == orbit_dim(N, l, Mode.LUMPED)

    def test_ordered_dimension(self):
        assert orbit_dim(2, 3, Mode.ORDERED) == 8

    def test_lump_matrix_columns_count_orderings(self):
        V = orbit_lump_matrix(2, 3)
        assert V.shape == (8, 4)
        assert V.sum(axis=0) == pytest.approx([1, 3, 3, 1])
        assert V.sum(axis=1) == pytest.approx(np.ones(8))


class TestLayout:
    def test_level_dimension(self, baseline):
        layout = build_layout(baseline, 2, Mode.LUMPED)
        segments = sum(2 ** kappa for kappa in range(baseline.S + 1) for _ in range(kappa + 1))
        assert layout.dim == baseline.mmap.L * segments * 3
        assert layout.segments[0] == (0, 0)
        assert layout.segments[-1] == (baseline.S, baseline.S)

    def test_segments_tile_the_level(self, baseline):
        layout = build_layout(baseline, 1, Mode.ORDERED)
        covered = sum(layout.segment_size(k, j) for k, j in layout.segments)
        assert covered == layout.dim

    def test_negative_level_rejected(self, baseline):
        with pytest.raises(ValidationError):
            build_layout(baseline, -1)


class TestIndexing:
    @pytest.mark.parametrize("mode", [Mode.ORDERED, Mode.LUMPED])
    def test_enumeration_is_a_bijection(self, mode):
        cfg = two_phase_config()
        layout = build_layout(cfg, 2, mode)
        states = enumerate_states(layout)
        assert len(set(states)) == layout.dim
        assert all(encode(c, layout) == i for i, c in enumerate(states))

    def test_known_coordinate(self, baseline):
        layout = build_layout(baseline, 2, Mode.ORDERED)
        coord = StateCoord(level=2, kappa=1, j=0, v=1, s_h=(), s_n=(1,), orbit=(1, 0))
        index = encode(coord, layout)
        offset = layout.offsets[(1, 0)]
        assert index == offset + np.ravel_multi_index((1, 1, 2), (2, 2, 4))
        assert decode(index, layout) == coord

    def test_lumped_orbit_must_sum_to_level(self, baseline):
        layout = build_layout(baseline, 2, Mode.LUMPED)
        with pytest.raises(ValidationError):
            encode(StateCoord(level=2, kappa=0, j=0, v=0, orbit=(1, 0)), layout)

    def test_service_tuples_must_match_counts(self, baseline):
        layout = build_layout(baseline, 0)
        with pytest.raises(ValidationError):
            encode(StateCoord(level=0, kappa=2, j=1, v=0, s_h=(0,), s_n=()), layout)

    def test_decode_out_of_range(self, baseline):
        layout = build_layout(baseline, 0)
        with pytest.raises(ValidationError):
            decode(layout.dim, layout)


def test_lump_matrix_aggregates_whole_levels(baseline):
    V = lump_matrix(2, baseline)
    ordered = build_layout(baseline, 2, Mode.ORDERED)
    lumped = build_layout(baseline, 2, Mode.LUMPED)
    assert V.shape == (ordered.dim, lumped.dim)
    assert V.sum(axis=1) == pytest.approx(np.ones(ordered.dim))
