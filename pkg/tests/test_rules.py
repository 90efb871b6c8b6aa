from __future__ import annotations

import numpy as np
import pytest

from spectral_intervene.errors import (
    DegenerateProjectionError,
    InfeasibleTargetsError,
    NoRecoverableStructureError,
)
from spectral_intervene.generators import BlockExampleConfig, gen_block_example, gen_hedonic
from spectral_intervene.market import (
    Intervention,
    MarketState,
    equilibrium_response,
    surplus_from_response,
)
from spectral_intervene.rules import (
    ThresholdPlan,
    complete_info_intervention,
    davis_kahan_diagnostics,
    first_eigenvector_intervention,
    robust_spectral_intervention,
    surplus_under_truth,
)
from spectral_intervene.presets import FIG3_NOISE
from spectral_intervene.signals import NoiseConfig, Signal, make_signal
from spectral_intervene.spectral import decompose, eigenspace_at, project

from conftest import random_valid_state


def philox(*entropy) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(list(entropy))))


def block_state_and_signal(gamma: float, seed: int):
    state, _ = gen_block_example(BlockExampleConfig(gamma=gamma), philox(41, seed))
    cfg = NoiseConfig(**{**FIG3_NOISE.__dict__, "seed": seed})
    return state, make_signal(state, cfg)


class TestThresholdPlan:
    def test_default_exponents(self):
        plan = ThresholdPlan.for_dimension(300)
        assert plan.m_hat == pytest.approx(300 ** (2 / 3))
        assert plan.m_under == pytest.approx(300 ** (7 / 12))
        assert plan.m_ref == pytest.approx(300 ** (3 / 4))
        assert 0 < plan.m_under < plan.m_hat < plan.m_ref

    def test_ordering_enforced(self):
        with pytest.raises(ValueError):
            ThresholdPlan(m_hat=5.0, m_under=6.0, m_ref=10.0)


class TestRobustRule:
    def test_single_axis_eigenspace(self):
        signal = Signal(
            d_hat=np.diag([-100.0, -1.0, -1.0]), q0_hat=np.array([0.5, 0.1, 0.1])
        )
        sigma = robust_spectral_intervention(signal, ThresholdPlan(m_hat=10.0))
        assert np.allclose(sigma.sigma, [2.0, 0.0, 0.0], atol=1e-12)

    def test_predicted_expenditure_is_one(self):
        for seed in range(5):
            state, signal = block_state_and_signal(0.3, seed)
            plan = ThresholdPlan.for_dimension(state.n)
            sigma = robust_spectral_intervention(signal, plan)
            assert float(sigma.sigma @ signal.q0_hat) == pytest.approx(1.0, abs=1e-10)

    def test_sigma_lies_in_recovered_eigenspace(self):
        state, signal = block_state_and_signal(0.3, 11)
        plan = ThresholdPlan.for_dimension(state.n)
        sigma = robust_spectral_intervention(signal, plan)
        space = eigenspace_at(decompose(signal.d_hat), plan.m_hat)
        resid = sigma.sigma - project(space, sigma.sigma)
        assert np.linalg.norm(resid) < 1e-10

    def test_realized_expenditure_concentrates_near_one(self):
        hits = 0
        trials = 40
        for seed in range(trials):
            state, signal = block_state_and_signal(0.3, 1000 + seed)
            plan = ThresholdPlan.for_dimension(state.n)
            sigma = robust_spectral_intervention(signal, plan)
            s_dot = float(sigma.sigma @ state.q0)
            hits += 0.8 <= s_dot <= 1.2
        assert hits >= 0.9 * trials

    def test_no_recoverable_structure_on_hedonic(self):
        state, _ = gen_hedonic(60, 10, 0.12, philox(42))
        signal = Signal.noiseless(state)
        with pytest.raises(NoRecoverableStructureError):
            robust_spectral_intervention(signal, ThresholdPlan(m_hat=10.0))

    def test_degenerate_projection(self):
        # Large eigenvalue present but observed quantities orthogonal to it.
        signal = Signal(d_hat=np.diag([-50.0, -1.0]), q0_hat=np.array([0.0, 0.4]))
        with pytest.raises(DegenerateProjectionError):
            robust_spectral_intervention(signal, ThresholdPlan(m_hat=10.0))


class TestFirstEigenvectorRule:
    def test_direct_formula_with_degenerate_warning(self):
        signal = Signal(d_hat=-np.eye(2), q0_hat=np.array([0.5, 0.5]))
        with pytest.warns(UserWarning):
            sigma = first_eigenvector_intervention(signal, 1.0)
        assert np.allclose(sigma.sigma, [2.0, 0.0], atol=1e-12)

    def test_zero_target_gives_zero(self):
        signal = Signal(d_hat=np.diag([-9.0, -1.0]), q0_hat=np.array([0.5, 0.5]))
        sigma = first_eigenvector_intervention(signal, 0.0)
        assert np.array_equal(sigma.sigma, np.zeros(2))

    def test_homogeneity_in_target(self):
        signal = Signal(d_hat=np.diag([-9.0, -1.0]), q0_hat=np.array([0.5, 0.5]))
        s1 = first_eigenvector_intervention(signal, 1.0)
        s3 = first_eigenvector_intervention(signal, 3.0)
        assert np.array_equal(s3.sigma, 3.0 * s1.sigma)

    def test_predicted_expenditure_matches_target(self):
        state, signal = block_state_and_signal(0.3, 5)
        sigma = first_eigenvector_intervention(signal, 1.0)
        assert float(sigma.sigma @ signal.q0_hat) == pytest.approx(1.0, abs=1e-10)

    def test_sign_pattern_subsidizes_third_block(self):
        # The recovered top eigenvector subsidizes the high-demand block and
        # taxes the other two in nearly all coordinates.
        fractions = []
        for seed in range(20):
            state, signal = block_state_and_signal(0.3, 300 + seed)
            sigma = first_eigenvector_intervention(signal, 1.0)
            n = state.n
            block = n // 3
            expected = np.ones(n)
            expected[: 2 * block] = -1.0
            fractions.append(np.mean(np.sign(sigma.sigma) == expected))
        assert np.median(fractions) >= 0.95

    def test_degenerate_projection(self):
        signal = Signal(d_hat=np.diag([-9.0, -1.0]), q0_hat=np.array([0.0, 1.0]))
        with pytest.raises(DegenerateProjectionError):
            first_eigenvector_intervention(signal, 1.0)


class TestCompleteInfoRule:
    def test_independent_products(self):
        state = MarketState(d=-np.eye(3), q0=np.array([1.0, 0.0, 0.0]))
        sigma = complete_info_intervention(state, target_c_dot=0.5, target_s_dot=1.0)
        rep = surplus_from_response(state, sigma, equilibrium_response(state, sigma))
        assert rep.c_dot == pytest.approx(0.5, abs=1e-10)
        assert rep.p_dot_surplus == pytest.approx(1.0, abs=1e-10)
        assert rep.s_dot == pytest.approx(1.0, abs=1e-10)

    def test_independent_products_infeasible_targets(self):
        state = MarketState(d=-np.eye(3), q0=np.array([1.0, 0.0, 0.0]))
        with pytest.raises(InfeasibleTargetsError):
            complete_info_intervention(state, target_c_dot=0.3, target_s_dot=1.0)

    def test_two_by_two_hits_targets(self):
        state = MarketState(d=np.array([[-1.0, 0.5], [0.5, -1.0]]), q0=np.array([0.6, 0.3]))
        sigma = complete_info_intervention(state, target_c_dot=0.2, target_s_dot=1.0)
        rep = surplus_from_response(state, sigma, equilibrium_response(state, sigma))
        assert rep.c_dot == pytest.approx(0.2, abs=1e-8)
        assert rep.s_dot == pytest.approx(1.0, abs=1e-8)
        assert rep.p_dot_surplus == pytest.approx(2 * (rep.s_dot - rep.c_dot), abs=1e-8)

    def test_zero_consumer_surplus_targets(self):
        state = MarketState(d=np.array([[-1.0, 0.5], [0.5, -1.0]]), q0=np.array([0.6, 0.3]))
        sigma = complete_info_intervention(state, target_c_dot=0.0, target_s_dot=1.0)
        rep = surplus_from_response(state, sigma, equilibrium_response(state, sigma))
        assert rep.p_dot_surplus == pytest.approx(2.0, abs=1e-8)

    def test_random_generic_states(self, rng):
        for _ in range(40):
            n = int(rng.integers(2, 20))
            state = random_valid_state(rng, n)
            c_target = float(rng.normal())
            s_target = float(rng.normal())
            sigma = complete_info_intervention(state, c_target, s_target)
            rep = surplus_from_response(state, sigma, equilibrium_response(state, sigma))
            assert rep.c_dot == pytest.approx(c_target, abs=1e-8)
            assert rep.s_dot == pytest.approx(s_target, abs=1e-8)
            assert abs(0.5 * rep.p_dot_surplus + rep.c_dot - rep.s_dot) < 1e-9


class TestDavisKahanDiagnostics:
    def test_zero_noise(self, rng):
        state = random_valid_state(rng, 12)
        signal = Signal.noiseless(state)
        lam = np.abs(np.linalg.eigvalsh(state.d))
        m = float(np.median(lam))
        plan = ThresholdPlan(m_hat=m, m_under=0.9 * m, m_ref=1.1 * m)
        diag = davis_kahan_diagnostics(state, signal, plan)
        assert diag.e_norm == 0.0
        assert diag.subspace_misalignment < 1e-10
        assert diag.top_vector_overlap == pytest.approx(1.0)

    def test_bound_holds_on_block_example(self):
        for seed in range(5):
            state, signal = block_state_and_signal(0.3, 500 + seed)
            plan = ThresholdPlan.for_dimension(state.n)
            diag = davis_kahan_diagnostics(state, signal, plan)
            assert diag.retained_dim == 2
            assert 0 <= diag.subspace_misalignment <= 1
            if np.isfinite(diag.gap) and diag.gap > 0:
                assert diag.subspace_misalignment <= diag.dk_bound + 1e-9

    def test_recovery_fails_at_high_gamma(self):
        overlaps = []
        for seed in range(15):
            state, signal = block_state_and_signal(0.9, 700 + seed)
            plan = ThresholdPlan.for_dimension(state.n)
            diag = davis_kahan_diagnostics(state, signal, plan)
            overlaps.append(diag.top_vector_overlap)
        assert np.median(overlaps) < 0.5

    def test_empty_retained_space_reports_nan(self):
        state = MarketState(d=-np.eye(4), q0=np.full(4, 0.4))
        signal = Signal.noiseless(state)
        diag = davis_kahan_diagnostics(state, signal, ThresholdPlan(m_hat=50.0))
        assert diag.retained_dim == 0
        assert np.isnan(diag.gap) and np.isnan(diag.subspace_misalignment)
        assert diag.top_vector_overlap == pytest.approx(1.0)


class TestSurplusUnderTruth:
    def test_matches_direct_pipeline(self, rng):
        state = random_valid_state(rng, 10)
        sigma = Intervention(sigma=rng.standard_normal(10))
        by_truth = surplus_under_truth(state, sigma)
        direct = surplus_from_response(state, sigma, equilibrium_response(state, sigma))
        assert by_truth.c_dot == pytest.approx(direct.c_dot, abs=1e-9)
        assert by_truth.w_dot == pytest.approx(direct.w_dot, abs=1e-9)
        assert by_truth.mode_contributions is not None


class TestRobustRuleExpenditureScale:
    def test_target_expenditure_scales_sigma(self):
        signal = Signal(
            d_hat=np.diag([-100.0, -1.0, -1.0]), q0_hat=np.array([0.5, 0.1, 0.1])
        )
        plan = ThresholdPlan(m_hat=10.0)
        base = robust_spectral_intervention(signal, plan)
        scaled = robust_spectral_intervention(signal, plan, target_expenditure=2.5)
        assert np.allclose(scaled.sigma, 2.5 * base.sigma, atol=1e-14)
        assert float(scaled.sigma @ signal.q0_hat) == pytest.approx(2.5, abs=1e-10)
