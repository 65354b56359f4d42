import numpy as np
import pytest
from scipy import linalg

from src.config.loader import load_preset
from src.models.stochastic import Mode, TruncationPolicy
from src.tools.generator_tools import GeneratorBuilder, assemble_truncated
from src.tools.measure_tools import compute_measures
from src.tools.solver_tools import (
    choose_truncation,
    direct_solve,
    global_residual,
    rate_matrices,
    solve,
    solve_steady_state,
)
from src.tools.state_tools import lump_matrix
from src.utils.errors import TruncationError

from conftest import scalar_config, two_phase_config


def _flat_difference(a, b):
    return float(np.abs(a.flat() - b.flat()).max())


class TestMatrixAnalytic:
    def test_scalar_chain_matches_null_space(self):
        cfg = scalar_config(S=1, M=2)
        ss = solve_steady_state(cfg, 2)
        Q = assemble_truncated(cfg, 2)
        basis = linalg.null_space(Q.T)
        reference = basis[:, 0] / basis[:, 0].sum()
        assert np.abs(ss.flat() - reference).max() <= 1e-10

    def test_baseline_matches_direct_solve(self, baseline):
        analytic = solve_steady_state(baseline, 4)
        oracle = direct_solve(baseline, 4)
        assert _flat_difference(analytic, oracle) <= 1e-8
        assert np.abs(analytic.z[0] - oracle.z[0]).max() <= 1e-8

    @pytest.mark.parametrize("L,M_H,M_N,N,S", [(1, 1, 1, 1, 3), (2, 2, 1, 2, 2), (2, 2, 2, 2, 3), (1, 2, 2, 1, 1)])
    def test_desk_configs_match_direct_solve(self, L, M_H, M_N, N, S):
        cfg = two_phase_config(L, M_H, M_N, N, S=S, M=5)
        assert _flat_difference(solve_steady_state(cfg, 5), direct_solve(cfg, 5)) <= 1e-8

    def test_normalised_and_nonnegative(self, baseline):
        ss = solve_steady_state(baseline, 5)
        assert ss.total_mass == pytest.approx(1.0, abs=1e-12)
        assert min(float(z.min()) for z in ss.z) >= 0.0
        assert global_residual(ss, baseline) <= 1e-9

    def test_level_equation_residual(self, baseline):
        R, residual = rate_matrices(baseline, 5)
        assert len(R) == 5
        assert residual <= 1e-9
        assert all(np.all(r >= 0) for r in R)

    def test_residual_substitutes_rates_into_three_term_equation(self, baseline):
        M = 4
        R, reported = rate_matrices(baseline, M)
        builder = GeneratorBuilder(baseline)
        worst = 0.0
        for level in range(M):
            main = builder.main(level + 1, M)
            lhs = builder.upper(level) + R[level] @ main
            if level + 1 < M:
                lhs = lhs + (R[level] @ R[level + 1]) @ builder.lower(level + 2)
            worst = max(worst, np.abs(lhs).sum(axis=1).max() / max(1.0, np.abs(main).sum(axis=1).max()))
        assert reported == pytest.approx(worst, abs=1e-14)
        assert worst <= 1e-9

    def test_ordered_and_lumped_solutions_agree(self, baseline):
        M = 3
        ordered = solve_steady_state(baseline, M, Mode.ORDERED)
        lumped = solve_steady_state(baseline, M, Mode.LUMPED)
        for level in range(M + 1):
            aggregated = ordered.z[level] @ lump_matrix(level, baseline)
            assert np.abs(aggregated - lumped.z[level]).max() <= 1e-8


class TestTruncation:
    def test_adaptive_level_is_stable(self):
        cfg = scalar_config()
        M, ss, report = choose_truncation(cfg, eps=1e-6)
        assert M == report.M == ss.M
        assert report.tail_mass <= 1e-6
        assert max(report.deltas.values()) <= 1e-6
        larger = compute_measures(solve_steady_state(cfg, M + 5), cfg)
        assert compute_measures(ss, cfg).E_orbit == pytest.approx(larger.E_orbit, abs=1e-4)

    def test_cap_too_small_raises(self):
        cfg = scalar_config(lambda_n=2.0, retry=0.2, leave=0.05)
        with pytest.raises(TruncationError) as info:
            choose_truncation(cfg, eps=1e-9, m_cap=3)
        assert info.value.m_cap == 3
        assert info.value.deltas

    def test_solve_honours_fixed_policy(self, baseline):
        cfg = baseline.replace(truncation=TruncationPolicy.fixed(3))
        ss, report = solve(cfg)
        assert ss.M == 3
        assert report.tried == [3]

    def test_zero_new_call_rate_keeps_orbit_empty(self):
        cfg = scalar_config(lambda_n=0.0, S=1, M=3)
        ss, _ = solve(cfg)
        assert ss.level_mass[1:] == pytest.approx(np.zeros(3), abs=1e-12)


@pytest.mark.slow
def test_baseline_preset_converges_under_its_cap():
    cfg = load_preset("baseline")
    ss, report = solve(cfg)
    assert report.M < cfg.truncation.m_cap
    assert report.tail_mass <= cfg.truncation.eps
    assert max(report.deltas.values()) <= cfg.truncation.eps
    assert ss.M == report.M
