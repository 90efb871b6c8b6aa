from __future__ import annotations

import numpy as np
import pytest

from spectral_intervene.errors import (
    AsymmetricInputError,
    DimensionMismatchError,
    NonNegativeDiagonalError,
)
from spectral_intervene.market import (
    Intervention,
    MarketState,
    equilibrium_response,
    household_surplus,
    normalize_slutsky,
    surplus_from_response,
    validate_market_state,
)

from conftest import random_intervention, random_valid_state


class TestNormalizeSlutsky:
    def test_identity_case(self):
        d_norm, gamma = normalize_slutsky(np.array([[-1.0]]))
        assert np.allclose(d_norm, [[-1.0]])
        assert np.allclose(gamma, [1.0])

    def test_two_by_two_matches_congruence_oracle(self):
        d_raw = np.array([[-4.0, 1.0], [1.0, -1.0]])
        d_norm, gamma = normalize_slutsky(d_raw)
        # Independent oracle: explicit diagonal congruence.
        g = np.diag(1.0 / np.sqrt(-np.diagonal(d_raw)))
        assert np.allclose(d_norm, g @ d_raw @ g, atol=1e-14)
        assert np.allclose(d_norm, [[-1.0, 0.5], [0.5, -1.0]], atol=1e-14)
        assert np.allclose(gamma, [0.5, 1.0])

    def test_scalar_multiple_of_identity(self):
        d_norm, gamma = normalize_slutsky(-2.0 * np.eye(3))
        assert np.allclose(d_norm, -np.eye(3), atol=1e-14)
        assert np.allclose(gamma, np.full(3, 1.0 / np.sqrt(2.0)))

    def test_nonnegative_diagonal_rejected(self):
        with pytest.raises(NonNegativeDiagonalError):
            normalize_slutsky(np.array([[-1.0, 0.0], [0.0, 0.0]]))

    def test_asymmetric_rejected(self):
        with pytest.raises(AsymmetricInputError):
            normalize_slutsky(np.array([[-1.0, 0.5], [0.2, -1.0]]))

    def test_output_exactly_symmetric(self, rng):
        a = rng.standard_normal((6, 6))
        d_norm, _ = normalize_slutsky(-(a @ a.T) - 1e-6 * np.eye(6))
        assert np.array_equal(d_norm, d_norm.T)


class TestValidateMarketState:
    def test_canonical_valid_state(self):
        state = MarketState(d=-np.eye(2), q0=np.array([0.5, 0.5]))
        assert validate_market_state(state) == []

    def test_nsd_violation_magnitude(self):
        # Eigenvalues of [[-1, 2], [2, -1]] are -1 +- 2, so max is +1.
        state = MarketState(d=np.array([[-1.0, 2.0], [2.0, -1.0]]), q0=np.zeros(2))
        report = validate_market_state(state)
        names = [v.name for v in report]
        assert "not_negative_semidefinite" in names
        mag = next(v.magnitude for v in report if v.name == "not_negative_semidefinite")
        assert mag == pytest.approx(1.0, abs=1e-10)

    def test_q0_norm_violation(self):
        state = MarketState(d=-np.eye(2), q0=np.array([1.0, 1.0]))
        report = validate_market_state(state)
        assert any(v.name == "q0_norm_exceeds_one" for v in report)

    def test_diagonal_and_symmetry_violations(self):
        state = MarketState(d=np.array([[-2.0, 0.1], [0.3, -1.0]]), q0=np.zeros(2))
        names = {v.name for v in validate_market_state(state)}
        assert "diagonal_not_minus_one" in names
        assert "asymmetric" in names


class TestEquilibriumResponse:
    def test_independent_products(self):
        state = MarketState(d=-np.eye(2), q0=np.zeros(2))
        resp = equilibrium_response(state, Intervention(sigma=np.array([1.0, 0.0])))
        assert np.allclose(resp.p_dot, [-0.5, 0.0])
        assert np.allclose(resp.q_dot, [0.5, 0.0])

    def test_two_by_two_against_linear_solve_oracle(self):
        d = np.array([[-1.0, 0.5], [0.5, -1.0]])
        state = MarketState(d=d, q0=np.zeros(2))
        sigma = np.array([1.0, 0.0])
        resp = equilibrium_response(state, Intervention(sigma=sigma))
        oracle = np.linalg.solve(np.eye(2) - d, -sigma)
        assert np.allclose(resp.p_dot, oracle, rtol=1e-12)
        assert np.allclose(resp.p_dot, [-8.0 / 15.0, -2.0 / 15.0], atol=1e-5)

    def test_eigenvector_intervention_closed_form(self, rng):
        # sigma = unit eigenvector u with eigenvalue lam gives
        # p_dot = -u / (1 + |lam|) and q_dot = u |lam| / (1 + |lam|).
        for _ in range(20):
            state = random_valid_state(rng, 8)
            vals, vecs = np.linalg.eigh(state.d)
            j = int(rng.integers(8))
            u, lam = vecs[:, j], vals[j]
            resp = equilibrium_response(state, Intervention(sigma=u))
            assert np.allclose(resp.p_dot, -u / (1 + abs(lam)), atol=1e-9)
            assert np.allclose(resp.q_dot, u * abs(lam) / (1 + abs(lam)), atol=1e-9)

    def test_linearity(self, rng):
        state = random_valid_state(rng, 12)
        s1, s2 = rng.standard_normal(12), rng.standard_normal(12)
        r1 = equilibrium_response(state, Intervention(sigma=s1))
        r2 = equilibrium_response(state, Intervention(sigma=s2))
        r12 = equilibrium_response(state, Intervention(sigma=s1 + s2))
        assert np.allclose(r12.p_dot, r1.p_dot + r2.p_dot, atol=1e-10)
        assert np.allclose(r12.q_dot, r1.q_dot + r2.q_dot, atol=1e-10)

    def test_q_dot_consistency(self, rng):
        for _ in range(10):
            state = random_valid_state(rng, 10)
            resp = equilibrium_response(state, random_intervention(rng, 10))
            assert np.allclose(resp.q_dot, state.d @ resp.p_dot, rtol=1e-10, atol=1e-12)

    def test_dimension_mismatch(self):
        state = MarketState(d=-np.eye(2), q0=np.zeros(2))
        with pytest.raises(DimensionMismatchError):
            equilibrium_response(state, Intervention(sigma=np.zeros(3)))


class TestSurplus:
    def test_independent_products_benchmark(self):
        # Single-product subsidy on independent products: c = s/2, p = s.
        state = MarketState(d=-np.eye(2), q0=np.array([1.0, 0.0]))
        sigma = Intervention(sigma=np.array([1.0, 0.0]))
        report = surplus_from_response(state, sigma, equilibrium_response(state, sigma))
        assert report.s_dot == pytest.approx(1.0)
        assert report.c_dot == pytest.approx(0.5)
        assert report.p_dot_surplus == pytest.approx(1.0)
        assert report.w_dot == pytest.approx(0.5)

    def test_zero_intervention(self, rng):
        state = random_valid_state(rng, 5)
        sigma = Intervention(sigma=np.zeros(5))
        report = surplus_from_response(state, sigma, equilibrium_response(state, sigma))
        assert (report.c_dot, report.p_dot_surplus, report.w_dot, report.s_dot) == (
            0.0, 0.0, 0.0, 0.0,
        )

    def test_half_p_plus_c_equals_s(self, rng):
        for _ in range(100):
            n = int(rng.integers(2, 30))
            state = random_valid_state(rng, n)
            sigma = random_intervention(rng, n)
            report = surplus_from_response(
                state, sigma, equilibrium_response(state, sigma)
            )
            assert abs(0.5 * report.p_dot_surplus + report.c_dot - report.s_dot) < 1e-9


class TestHouseholdSurplus:
    def test_empty_household(self):
        assert household_surplus(np.zeros(3), np.array([1.0, -1.0, 2.0])) == 0.0

    def test_single_household_economy(self, rng):
        state = random_valid_state(rng, 7)
        sigma = random_intervention(rng, 7)
        resp = equilibrium_response(state, sigma)
        report = surplus_from_response(state, sigma, resp)
        assert household_surplus(state.q0, resp.p_dot) == pytest.approx(report.c_dot)

    def test_direct_inner_product(self):
        assert household_surplus(np.array([1.0, 0.0]), np.array([-0.5, 0.0])) == 0.5

    def test_partition_aggregates_to_c_dot(self, rng):
        state = random_valid_state(rng, 9)
        sigma = random_intervention(rng, 9)
        resp = equilibrium_response(state, sigma)
        report = surplus_from_response(state, sigma, resp)
        shares = rng.dirichlet(np.ones(4), size=9).T  # 4 households, shares sum to 1
        total = sum(household_surplus(shares[h] * state.q0, resp.p_dot) for h in range(4))
        assert abs(total - report.c_dot) < 1e-10

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            household_surplus(np.zeros(3), np.zeros(4))


class TestSerialization:
    def test_json_round_trip(self, rng, tmp_path):
        state = random_valid_state(rng, 6)
        path = tmp_path / "state.json"
        state.to_json(path)
        loaded = MarketState.from_json(path)
        assert np.array_equal(loaded.d, state.d)
        assert np.array_equal(loaded.q0, state.q0)

    def test_csv_loading(self, rng, tmp_path):
        state = random_valid_state(rng, 4)
        mpath, qpath = tmp_path / "d.csv", tmp_path / "q0.csv"
        mpath.write_text("\n".join(",".join(repr(float(x)) for x in row) for row in state.d))
        qpath.write_text("\n".join(repr(float(x)) for x in state.q0))
        loaded = MarketState.from_csv(mpath, qpath)
        assert np.array_equal(loaded.d, state.d)
        assert np.array_equal(loaded.q0, state.q0)

    def test_arrays_are_read_only(self, rng):
        state = random_valid_state(rng, 3)
        with pytest.raises(ValueError):
            state.d[0, 0] = 5.0
