import numpy as np
import pytest

from src.config import settings
from src.models.stochastic import PhaseType
from src.tools import kron_tools
from src.tools.kron_tools import (
    check_cap,
    kron_chain,
    kron_product,
    kron_sum,
    kron_sum_chain,
    orbit_join,
    phi_orbit_leave,
    phi_orbit_retry,
    phi_orbit_success,
    phi_service,
    psi_orbit,
    psi_orbit_failed,
    psi_service,
)
from src.utils.errors import DimensionCapError, ValidationError


def _inf(matrix):
    return float(np.abs(matrix).sum(axis=1).max())


class TestKroneckerAlgebra:
    def test_mixed_product_identity(self, rng):
        A, B, C, D = (rng.standard_normal((2, 2)) for _ in range(4))
        lhs = kron_product(A, B) @ kron_product(C, D)
        assert _inf(lhs - kron_product(A @ C, B @ D)) <= 1e-12

    def test_kron_sum_eigenvalues(self, rng):
        A = np.triu(rng.standard_normal((2, 2)))
        B = np.triu(rng.standard_normal((2, 2)))
        expected = sorted(a + b for a in np.diag(A) for b in np.diag(B))
        assert sorted(np.linalg.eigvals(kron_sum(A, B)).real) == pytest.approx(expected, abs=1e-10)

    def test_kron_sum_needs_square_inputs(self):
        with pytest.raises(ValidationError):
            kron_sum(np.ones((2, 3)), np.eye(2))

    def test_empty_factor_is_neutral(self):
        A = np.array([[-1.0, 1.0], [0.0, -2.0]])
        assert kron_sum_chain(A) == pytest.approx(A)
        assert kron_chain(A).shape == (2, 2)

    def test_cap_is_enforced(self, monkeypatch):
        monkeypatch.setattr(settings, "DIMENSION_CAP", 10)
        with pytest.raises(DimensionCapError) as info:
            kron_product(np.eye(3), np.eye(3))
        assert info.value.cap == 10
        check_cap(3, 3)


class TestServiceOperators:
    @pytest.fixture
    def erlang(self):
        return PhaseType([1.0, 0.0], [[-2.0, 2.0], [0.0, -2.0]])

    def test_zero_servers_give_empty_construct(self, erlang):
        assert psi_service(erlang, 0).shape == (1, 1)
        assert not psi_service(erlang, 0).any()

    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_completion_balances_internal_evolution(self, erlang, k):
        psi, phi = psi_service(erlang, k), phi_service(erlang, k)
        assert psi.shape == (2 ** k, 2 ** k)
        assert phi.shape == (2 ** k, 2 ** (k - 1))
        assert np.abs(psi.sum(axis=1) + phi.sum(axis=1)).max() <= 1e-12

    def test_cached_operators_are_read_only(self, erlang):
        with pytest.raises(ValueError):
            psi_service(erlang, 2)[0, 0] = 1.0


class TestOrbitOperators:
    def test_two_customer_orbit_is_gamma_kron_sum(self, baseline):
        r = baseline.retrial
        assert _inf(psi_orbit(r, 2) - kron_sum(r.Gamma, r.Gamma)) <= 1e-14

    @pytest.mark.parametrize("l", [1, 2, 3])
    def test_orbit_rows_balance(self, baseline, l):
        r = baseline.retrial
        outflow = (psi_orbit(r, l) + psi_orbit_failed(r, l)).sum(axis=1)
        leave = phi_orbit_leave(r, l).sum(axis=1)
        assert np.abs(outflow + leave).max() <= 1e-12

    def test_success_starts_a_new_call(self, baseline):
        r, sn = baseline.retrial, baseline.service_n
        success = phi_orbit_success(r, 2, sn)
        assert success.shape == (r.N ** 2, sn.M * r.N)
        assert success.sum(axis=1) == pytest.approx(phi_orbit_retry(r, 2).sum(axis=1))

    def test_join_distributes_by_gamma(self, baseline):
        join = orbit_join(baseline.retrial, 2)
        assert join.shape == (4, 8)
        assert join.sum(axis=1) == pytest.approx(np.ones(4))

    def test_clear_caches(self, baseline):
        psi_orbit(baseline.retrial, 3)
        assert psi_orbit.cache_info().currsize >= 1
        kron_tools.clear_caches()
        assert psi_orbit.cache_info().currsize == 0
