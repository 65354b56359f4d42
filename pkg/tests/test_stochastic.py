import numpy as np
import pytest
from scipy import linalg

from src.models.stochastic import (
    CallClass,
    MarkedMAP,
    PhaseType,
    RetrialPH,
    TruncationPolicy,
    communicating_classes,
    fundamental_rates,
    stationary_vector,
)
from src.utils.errors import IrreducibilityError, ValidationError

from conftest import scalar_config, two_phase_config

PRINTED_C0 = [[-1.3431, 0.0230], [0.0, -17.183]]
PRINTED_CX = [[0.66, 0.0], [0.2567, 8.3351]]


class TestMarkedMAP:
    def test_printed_matrices_fail_strict_row_sum_tolerance(self):
        m = MarkedMAP(PRINTED_C0, PRINTED_CX, PRINTED_CX, row_sum_tol=1e-9)
        messages = [str(v) for v in m.violations()]
        assert any("row sum" in msg for msg in messages)

    def test_printed_matrices_pass_loose_tolerance(self):
        m = MarkedMAP(PRINTED_C0, PRINTED_CX, PRINTED_CX, row_sum_tol=1e-2)
        assert m.violations() == []

    def test_renormalized_rows_sum_to_zero(self):
        m = MarkedMAP(PRINTED_C0, PRINTED_CX, PRINTED_CX, row_sum_tol=1e-2).renormalized()
        assert np.abs(m.generator.sum(axis=1)).max() <= 1e-12

    def test_baseline_rates_are_close_to_one(self, baseline):
        lam_h, lam_n, lam = fundamental_rates(baseline.mmap)
        assert lam_h == pytest.approx(1.0, abs=5e-3)
        assert lam_n == pytest.approx(1.0, abs=5e-3)
        assert lam == pytest.approx(lam_h + lam_n)

    def test_negative_marked_rate_is_reported_with_location(self):
        m = MarkedMAP([[-1.0]], [[-0.2]], [[1.2]])
        located = [v for v in m.violations() if v.component == "mmap.C_N"]
        assert located and located[0].location == (0, 0)

    def test_reducible_generator_is_rejected(self):
        C0 = [[-1.0, 0.0], [0.0, -1.0]]
        C_N = [[0.5, 0.0], [0.0, 0.5]]
        m = MarkedMAP(C0, C_N, C_N)
        assert any("reducible" in str(v) for v in m.violations())
        with pytest.raises(IrreducibilityError):
            stationary_vector(m)

    def test_shape_mismatch_raises(self):
        with pytest.raises(ValidationError):
            MarkedMAP([[-1.0, 1.0], [1.0, -1.0]], [[0.0]], [[0.0]])

    def test_stationary_vector_matches_dense_null_space(self, rng):
        L = 3
        off = rng.random((L, L)) * (1 - np.eye(L))
        C_N, C_H = rng.random((L, L)), rng.random((L, L))
        C0 = off - np.diag(off.sum(axis=1) + C_N.sum(axis=1) + C_H.sum(axis=1))
        m = MarkedMAP(C0, C_N, C_H)
        pi = stationary_vector(m)
        basis = linalg.null_space(m.generator.T)
        reference = basis[:, 0] / basis[:, 0].sum()
        assert np.abs(pi - reference).max() <= 1e-10
        lam_h, _, _ = fundamental_rates(m)
        assert lam_h == pytest.approx(float(pi @ C_H @ np.ones(L)), abs=1e-12)

    def test_scalar_rates_are_the_marked_entries(self):
        cfg = scalar_config(lambda_h=0.3, lambda_n=0.7)
        assert fundamental_rates(cfg.mmap) == pytest.approx((0.3, 0.7, 1.0))

    @pytest.mark.parametrize("call_class,target", [(CallClass.HANDOFF, 0.35), (CallClass.NEW, 1.8)])
    def test_with_class_rate_reaches_target(self, baseline, call_class, target):
        scaled = baseline.mmap.with_class_rate(call_class, target)
        lam_h, lam_n, _ = fundamental_rates(scaled)
        achieved = lam_h if call_class is CallClass.HANDOFF else lam_n
        assert achieved == pytest.approx(target, abs=1e-8)
        assert np.abs(scaled.generator.sum(axis=1)).max() <= 1e-12

    def test_zero_target_removes_the_class(self, baseline):
        scaled = baseline.mmap.with_class_rate(CallClass.NEW, 0.0)
        assert not scaled.C_N.any()
        assert scaled.violations() == []


class TestPhaseType:
    def test_erlang_two_mean_rate(self):
        erlang = PhaseType([1.0, 0.0], [[-1.0, 1.0], [0.0, -1.0]])
        assert erlang.mean_rate == pytest.approx(0.5)
        assert erlang.A0 == pytest.approx([0.0, 1.0])

    def test_scaled_to_rate(self):
        erlang = PhaseType([1.0, 0.0], [[-1.0, 1.0], [0.0, -1.0]])
        assert erlang.scaled_to_rate(1.25).mean_rate == pytest.approx(1.25)

    def test_beta_must_sum_to_one(self):
        broken = PhaseType([0.6, 0.6], [[-1.0, 0.0], [0.0, -1.0]])
        assert any("row sum" in str(v) for v in broken.violations("service_h"))

    def test_singular_sub_generator_is_reported(self):
        closed = PhaseType([1.0, 0.0], [[-1.0, 1.0], [1.0, -1.0]])
        assert closed.violations()

    def test_mean_matches_monte_carlo(self, rng):
        ph = PhaseType([0.2, 0.5, 0.3], [[-3.0, 1.0, 0.5], [0.0, -2.0, 1.0], [0.4, 0.0, -1.5]])
        samples = 200_000
        rates = -np.diag(ph.A)
        jumps = np.hstack([ph.A - np.diag(np.diag(ph.A)), ph.A0.reshape(-1, 1)]) / rates[:, None]
        cumulative = np.cumsum(jumps, axis=1)
        phase = np.searchsorted(np.cumsum(ph.beta), rng.random(samples), side="right")
        times = np.zeros(samples)
        active = phase < 3
        while active.any():
            idx = np.nonzero(active)[0]
            times[idx] += rng.exponential(1.0 / rates[phase[idx]])
            u = rng.random(idx.size)
            phase[idx] = (u[:, None] >= cumulative[phase[idx]]).sum(axis=1)
            active = phase < 3
        stderr = times.std(ddof=1) / np.sqrt(samples)
        assert abs(times.mean() - 1.0 / ph.mean_rate) <= 3 * stderr


class TestRetrialPH:
    def test_baseline_retrial_rate(self, baseline):
        assert baseline.retrial.mean_rate == pytest.approx(4.0 / 3.0)
        assert baseline.retrial.violations() == []

    def test_exit_balance_is_enforced(self):
        unbalanced = RetrialPH([1.0], [[-2.0]], [0.5], [1.0])
        assert any("expected 0" in str(v) for v in unbalanced.violations())

    def test_scaled_to_rate_keeps_balance(self, baseline):
        scaled = baseline.retrial.scaled_to_rate(3.0)
        assert scaled.mean_rate == pytest.approx(3.0)
        assert scaled.violations() == []


class TestModelConfig:
    def test_presets_validate(self, baseline):
        assert baseline.validate() == []

    def test_validated_raises_with_every_violation(self):
        cfg = scalar_config().replace(S=0, service_h=PhaseType([0.5], [[-1.0]]))
        with pytest.raises(ValidationError) as info:
            cfg.validated()
        components = {v.component for v in info.value.violations}
        assert {"system.S", "service_h.beta"} <= components

    @pytest.mark.parametrize("L,M_H,M_N,N", [(1, 1, 1, 1), (2, 2, 2, 2), (2, 1, 2, 1)])
    def test_small_configs_are_admissible(self, L, M_H, M_N, N):
        assert two_phase_config(L, M_H, M_N, N).validate() == []

    def test_truncation_policy_bounds(self):
        with pytest.raises(ValidationError):
            TruncationPolicy(M=0)
        with pytest.raises(ValidationError):
            TruncationPolicy(eps=0.0)
        assert TruncationPolicy.fixed(5).is_fixed
        assert not TruncationPolicy.adaptive().is_fixed

    def test_communicating_classes_of_irreducible_generator(self, baseline):
        assert communicating_classes(baseline.mmap.generator) == [[0, 1]]
