import math

import numpy as np
import pytest

from regime_levy.errors import DegenerateRegimeError, NumericalError
from regime_levy.regime_em import (
    EmTrace,
    ProbabilityMatrix,
    RegimeModel,
    conditional_density,
    default_init,
    em_estimate,
    hamilton_filter,
    kim_smoother,
    m_step,
    stationary_distribution,
)

from oracles import enumerate_paths, weighted_ols_ar1


def _model(kappa, theta, sigma, Pi):
    return RegimeModel(kappa=np.array(kappa), theta=np.array(theta),
                       sigma=np.array(sigma), Pi=np.array(Pi))


SYMMETRIC_PI = [[0.9, 0.1], [0.1, 0.9]]


class TestModelTypes:
    def test_pi_rows_must_sum_to_one(self):
        with pytest.raises(ValueError, match="sum to 1"):
            _model([1, 1], [0, 0], [1, 1], [[0.9, 0.2], [0.1, 0.9]])

    def test_sigma_must_be_positive(self):
        with pytest.raises(ValueError, match="sigma"):
            _model([1, 1], [0, 0], [1, 0], SYMMETRIC_PI)

    def test_needs_two_regimes(self):
        with pytest.raises(ValueError, match="at least 2"):
            RegimeModel(kappa=np.array([1.0]), theta=np.array([0.0]),
                        sigma=np.array([1.0]), Pi=np.array([[1.0]]))

    def test_probability_rows_validated(self):
        with pytest.raises(ValueError, match="sum to 1"):
            ProbabilityMatrix(np.array([[0.6, 0.6]]), "filtered")
        with pytest.raises(ValueError, match="kind"):
            ProbabilityMatrix(np.array([[0.5, 0.5]]), "posterior")

    def test_stationary_distribution(self):
        pi = stationary_distribution(np.array([[0.98, 0.02], [0.06, 0.94]]))
        np.testing.assert_allclose(pi, [0.75, 0.25], atol=1e-12)
        np.testing.assert_allclose(pi @ np.array([[0.98, 0.02], [0.06, 0.94]]),
                                   pi, atol=1e-12)


class TestConditionalDensity:
    def test_gaussian_peak(self):
        m = _model([0.5, 1.0], [0.01, 0.0], [1.0, 1.0], SYMMETRIC_PI)
        x_prev = 0.3
        mean = 0.5 * 0.01 + 0.5 * x_prev
        assert conditional_density(mean, x_prev, 0, m) == pytest.approx(
            1.0 / math.sqrt(2.0 * math.pi), rel=1e-12)

    def test_full_reversion_ignores_previous_value(self):
        m = _model([1.0, 1.0], [0.02, 0.0], [0.5, 0.5], SYMMETRIC_PI)
        d1 = conditional_density(0.1, -5.0, 0, m)
        d2 = conditional_density(0.1, 17.0, 0, m)
        assert d1 == d2

    def test_hand_case(self):
        m = _model([0.5, 1.0], [0.0, 0.0], [0.1, 1.0], SYMMETRIC_PI)
        # mean = 0.5*0 + 0.5*0.2 = 0.1, so x_t = 0.1 sits at the peak of
        # N(0.1, 0.01): density 1/(sqrt(2 pi) 0.1).
        assert conditional_density(0.1, 0.2, 0, m) == pytest.approx(3.98942280401,
                                                                    rel=1e-9)

    def test_regime_range_checked(self):
        m = _model([1, 1], [0, 0], [1, 1], SYMMETRIC_PI)
        with pytest.raises(ValueError):
            conditional_density(0.0, 0.0, 2, m)


class TestHamiltonFilter:
    def test_identical_regimes_carry_no_information(self):
        m = _model([0.9, 0.9], [0.001, 0.001], [0.02, 0.02],
                   [[0.7, 0.3], [0.4, 0.6]])
        x = np.random.default_rng(5).normal(0, 0.02, 50)
        filtered, predicted, _ = hamilton_filter(x, m, np.array([0.5, 0.5]))
        np.testing.assert_allclose(filtered.values, predicted.values, atol=1e-14)

    def test_one_step_bayes_hand_case(self):
        # Two regimes whose densities at the observed step differ 2:1.
        m = _model([1.0, 1.0], [0.0, 0.0], [1.0, 2.0], SYMMETRIC_PI)
        x = np.array([0.0, 0.0])   # density ratio at 0: (1/1)/(1/2) = 2
        filtered, _, _ = hamilton_filter(x, m, np.array([0.5, 0.5]))
        np.testing.assert_allclose(filtered.values[1], [2.0 / 3.0, 1.0 / 3.0],
                                   rtol=1e-12)

    def test_loglik_matches_direct_recomputation(self):
        rng = np.random.default_rng(17)
        m = _model([0.8, 1.1], [0.002, -0.003], [0.01, 0.05],
                   [[0.95, 0.05], [0.1, 0.9]])
        x = rng.normal(0, 0.02, 200)
        initial = np.array([0.7, 0.3])
        filtered, predicted, loglik = hamilton_filter(x, m, initial)
        direct = 0.0
        for t in range(1, len(x)):
            dens = np.array([conditional_density(x[t], x[t - 1], i, m)
                             for i in range(2)])
            direct += math.log(float(predicted.values[t] @ dens))
        assert loglik == pytest.approx(direct, abs=1e-10)

    def test_matches_enumeration(self):
        rng = np.random.default_rng(3)
        for _ in range(4):
            T = int(rng.integers(1, 9))
            m = _model(rng.uniform(0.2, 1.2, 2), rng.normal(0, 0.01, 2),
                       rng.uniform(0.005, 0.05, 2), [[0.9, 0.1], [0.2, 0.8]])
            x = rng.normal(0, 0.02, T)
            initial = np.array([0.6, 0.4])
            filtered, predicted, loglik = hamilton_filter(x, m, initial)
            smoothed = kim_smoother(filtered, predicted, m)
            ll_ref, marginals_ref = enumerate_paths(x, m, initial)
            assert loglik == pytest.approx(ll_ref, abs=1e-9)
            np.testing.assert_allclose(smoothed.values, marginals_ref, atol=1e-9)

    def test_initial_must_be_distribution(self):
        m = _model([1, 1], [0, 0], [1, 1], SYMMETRIC_PI)
        with pytest.raises(ValueError, match="probability vector"):
            hamilton_filter(np.zeros(3), m, np.array([0.7, 0.7]))

    def test_underflow_reports_failing_step(self):
        m = _model([1.0, 1.0], [0.0, 0.0], [1e-3, 1e-3], SYMMETRIC_PI)
        x = np.array([0.0, 1e6])
        with pytest.raises(NumericalError, match="t=1"):
            hamilton_filter(x, m, np.array([0.5, 0.5]))


class TestKimSmoother:
    def test_single_step_equals_filtered(self):
        m = _model([1, 1], [0, 0], [1, 1], SYMMETRIC_PI)
        filtered, predicted, _ = hamilton_filter(np.array([0.1]), m,
                                                 np.array([0.5, 0.5]))
        smoothed = kim_smoother(filtered, predicted, m)
        np.testing.assert_array_equal(smoothed.values, filtered.values)

    def test_absorbing_chain_gives_constant_smoothing(self):
        # With an identity transition matrix the regime never switches, so
        # the smoothed posterior is the same at every step.
        m = _model([1.0, 1.0], [0.0, 0.0], [0.01, 0.05],
                   [[1.0, 0.0], [0.0, 1.0]])
        x = np.random.default_rng(9).normal(0, 0.02, 30)
        filtered, predicted, _ = hamilton_filter(x, m, np.array([0.5, 0.5]))
        smoothed = kim_smoother(filtered, predicted, m)
        np.testing.assert_allclose(smoothed.values,
                                   np.tile(smoothed.values[0], (30, 1)),
                                   atol=1e-12)
        _, marginals = enumerate_paths(x[:8], m, np.array([0.5, 0.5]))
        filtered8, predicted8, _ = hamilton_filter(x[:8], m, np.array([0.5, 0.5]))
        np.testing.assert_allclose(
            kim_smoother(filtered8, predicted8, m).values, marginals, atol=1e-12)

    def test_uninformative_likelihood_smooths_to_stationary(self):
        Pi = np.array([[0.7, 0.3], [0.15, 0.85]])
        m = _model([1.0, 1.0], [0.0, 0.0], [0.02, 0.02], Pi)
        stationary = stationary_distribution(Pi)
        x = np.random.default_rng(2).normal(0, 0.02, 40)
        filtered, predicted, _ = hamilton_filter(x, m, stationary)
        smoothed = kim_smoother(filtered, predicted, m)
        np.testing.assert_allclose(smoothed.values,
                                   np.tile(stationary, (40, 1)), atol=1e-12)


class TestMStep:
    def test_full_weight_recovers_plain_ols(self):
        rng = np.random.default_rng(10)
        x = np.empty(400)
        x[0] = 0.0
        for t in range(1, 400):
            x[t] = 0.004 + 0.2 * x[t - 1] + 0.03 * rng.standard_normal()
        smoothed = ProbabilityMatrix(np.column_stack([np.ones(400),
                                                      np.zeros(400)]),
                                     "smoothed")
        prev = _model([0.5, 0.5], [0.0, 0.0], [0.05, 0.05], SYMMETRIC_PI)
        with pytest.raises(DegenerateRegimeError):
            m_step(x, smoothed, prev)   # regime 1 has no weight at all
        tiny = 1e-6
        values = np.column_stack([np.full(400, 1.0 - tiny), np.full(400, tiny)])
        smoothed = ProbabilityMatrix(values, "smoothed")
        updated = m_step(x, smoothed, prev)
        a, b, mse = weighted_ols_ar1(x, np.full(399, 1.0 - tiny))
        assert updated.kappa[0] == pytest.approx(1.0 - b, rel=1e-9)
        assert updated.theta[0] == pytest.approx(a / (1.0 - b), rel=1e-9)
        assert updated.sigma[0] == pytest.approx(math.sqrt(mse), rel=1e-9)

    def test_disjoint_halves_recover_per_segment_ols(self):
        rng = np.random.default_rng(11)
        n = 600
        x = np.empty(n)
        x[0] = 0.0
        for t in range(1, n):
            if t < n // 2:
                x[t] = 0.002 + 0.1 * x[t - 1] + 0.01 * rng.standard_normal()
            else:
                x[t] = -0.004 + 0.5 * x[t - 1] + 0.05 * rng.standard_normal()
        weights = np.zeros((n, 2))
        weights[:n // 2, 0] = 1.0
        weights[n // 2:, 1] = 1.0
        weights[0] = [0.5, 0.5]      # first row carries no pair anyway
        # Give the opposite regime a vanishing weight so both rows stay valid
        weights = np.clip(weights, 1e-9, None)
        weights /= weights.sum(axis=1, keepdims=True)
        smoothed = ProbabilityMatrix(weights, "smoothed")
        prev = _model([0.5, 0.5], [0.0, 0.0], [0.05, 0.05], SYMMETRIC_PI)
        updated = m_step(x, smoothed, prev)
        for regime in (0, 1):
            a, b, mse = weighted_ols_ar1(x, weights[1:, regime])
            assert updated.kappa[regime] == pytest.approx(1.0 - b, rel=1e-7)
            assert updated.sigma[regime] == pytest.approx(math.sqrt(mse),
                                                          rel=1e-7)

    def test_constant_probabilities_collapse_transition_update(self):
        # Uninformative likelihoods and identical rows of Pi make filtered,
        # predicted, and smoothed all equal to that row, and the transition
        # update returns it unchanged.
        row = np.array([0.3, 0.7])
        Pi = np.tile(row, (2, 1))
        m = _model([1.0, 1.0], [0.0, 0.0], [0.02, 0.02], Pi)
        x = np.random.default_rng(4).normal(0, 0.02, 50)
        filtered, predicted, _ = hamilton_filter(x, m, row)
        smoothed = kim_smoother(filtered, predicted, m)
        updated = m_step(x, smoothed, m, filtered, predicted)
        np.testing.assert_allclose(updated.Pi, Pi, atol=1e-12)


class TestEmEstimate:
    def test_recovers_fixture_parameters(self, two_regime_fixture):
        fx = two_regime_fixture
        model, smoothed, trace = em_estimate(fx.returns, K=2)
        order = np.argsort(model.sigma)
        sigma = model.sigma[order]
        np.testing.assert_allclose(sigma, fx.model.sigma, rtol=0.10)
        Pi = model.Pi[np.ix_(order, order)]
        np.testing.assert_allclose(np.diag(Pi), np.diag(fx.model.Pi), atol=0.05)
        diffs = np.diff(trace.loglik_by_iter)
        assert np.all(diffs > -1e-8)

    def test_label_swap_symmetry(self, two_regime_fixture):
        x = two_regime_fixture.returns[:2000]
        init = default_init(x, 2)
        swap = [1, 0]
        model_a, smoothed_a, _ = em_estimate(x, K=2, init=init, max_iter=5)
        model_b, smoothed_b, _ = em_estimate(x, K=2, init=init.permuted(swap),
                                             max_iter=5)
        np.testing.assert_allclose(model_b.sigma, model_a.sigma[swap], rtol=1e-9)
        np.testing.assert_allclose(model_b.Pi, model_a.Pi[np.ix_(swap, swap)],
                                   atol=1e-9)
        np.testing.assert_allclose(smoothed_b.values, smoothed_a.values[:, swap],
                                   atol=1e-9)

    def test_single_sweep_contract(self, two_regime_fixture):
        x = two_regime_fixture.returns[:1000]
        model, smoothed, trace = em_estimate(x, K=2, max_iter=1)
        assert trace.iterations == 1
        assert trace.stop_reason == "max-iters"
        assert len(trace.loglik_by_iter) == 2

    def test_fixed_point_when_started_at_optimum(self, two_regime_fixture):
        x = two_regime_fixture.returns[:3000]
        initial = np.array([0.5, 0.5])   # what the default init implies
        converged_model, _, _ = em_estimate(x, K=2, eps=1e-9, max_iter=2000,
                                            initial=initial)
        model, _, trace = em_estimate(x, K=2, init=converged_model,
                                      initial=initial)
        assert trace.stop_reason == "tolerance"
        assert trace.iterations <= 2
        assert trace.loglik_by_iter[-1] == pytest.approx(
            trace.loglik_by_iter[0], abs=1e-6)

    def test_parameter_validation(self, two_regime_fixture):
        x = two_regime_fixture.returns[:100]
        with pytest.raises(ValueError, match="eps"):
            em_estimate(x, K=2, eps=0.0)
        with pytest.raises(ValueError, match="max_iter"):
            em_estimate(x, K=2, max_iter=0)
        with pytest.raises(ValueError, match="at least 2"):
            em_estimate(x, K=1)

    def test_trace_is_em_trace(self, two_regime_fixture):
        _, _, trace = em_estimate(two_regime_fixture.returns[:500], K=2,
                                  max_iter=3)
        assert isinstance(trace, EmTrace)
        assert trace.stop_reason in ("max-iters", "tolerance")

    def test_three_regime_machinery(self, two_regime_fixture):
        model, smoothed, trace = em_estimate(two_regime_fixture.returns[:3000],
                                             K=3, max_iter=10)
        assert model.K == 3
        assert smoothed.K == 3
        np.testing.assert_allclose(smoothed.values.sum(axis=1), 1.0, atol=1e-10)
        assert np.all(np.diff(trace.loglik_by_iter) > -1e-8)
