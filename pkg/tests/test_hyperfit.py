import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from bhs import CuratedObservation, ExperimentSummary, HyperParameters, InvalidInputError
from bhs.hyperfit import (
    InverseGammaParams,
    fit_tau,
    gibbs_lambda_oracle,
    lambda_conditional,
    lambda_mode,
    marginal_loglik,
)


def curated(etas, gammas):
    return [CuratedObservation(float(e), float(g)) for e, g in zip(etas, gammas)]


def grid_oracle(etas, gammas, hi=100.0, step=1e-4):
    grid = np.arange(0.0, hi + step / 2, step)
    v = grid[:, None] + np.asarray(gammas)[None, :]
    ll = -0.5 * np.sum(np.log(2 * np.pi * v) + np.asarray(etas)[None, :] ** 2 / v, axis=1)
    return grid[int(np.argmax(ll))]


class TestFitTau:
    def test_single_observation(self):
        oracle = grid_oracle([2.0], [1.0])
        tau = fit_tau(curated([2.0], [1.0]))
        assert abs(tau - oracle) < 1e-3
        assert tau == pytest.approx(3.0, abs=1e-6)

    def test_all_zero_boundary(self):
        assert fit_tau(curated([0.0] * 5, [1.0] * 5)) == 0.0

    def test_small_spread_boundary(self):
        # mean(eta^2) < gamma puts the optimum at zero
        assert fit_tau(curated([0.5, -0.5, 0.2], [1.0] * 3)) == 0.0

    def test_common_gamma_closed_form(self):
        rng = np.random.default_rng(1)
        K, tau_true, gamma = 10_000, 2.0, 1.0
        eta = rng.normal(0.0, math.sqrt(tau_true + gamma), K)
        tau = fit_tau(curated(eta, [gamma] * K))
        closed = max(0.0, float(np.mean(eta**2)) - gamma)
        se = math.sqrt(2.0 / K) * (tau_true + gamma)
        assert abs(tau - closed) < 3 * se
        assert tau == pytest.approx(closed, abs=1e-6)

    def test_heteroskedastic_matches_grid(self):
        rng = np.random.default_rng(2)
        gammas = rng.uniform(0.2, 3.0, 200)
        etas = rng.normal(0.0, np.sqrt(1.5 + gammas))
        tau = fit_tau(curated(etas, gammas))
        assert abs(tau - grid_oracle(etas, gammas, hi=10.0, step=1e-4)) < 1e-3

    def test_empty(self):
        with pytest.raises(InvalidInputError):
            fit_tau([])

    def test_explicit_tau_max_caps(self):
        assert fit_tau(curated([10.0], [1.0]), tau_max=5.0) == 5.0

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.tuples(st.floats(-50, 50), st.floats(0.01, 10)), min_size=1, max_size=30),
           st.randoms())
    def test_permutation_invariance_and_certificate(self, rows, rnd):
        obs = [CuratedObservation(e, g) for e, g in rows]
        shuffled = list(obs)
        rnd.shuffle(shuffled)
        a, b = fit_tau(obs), fit_tau(shuffled)
        assert a == b
        eta = np.array([o.eta_hat for o in obs])
        gamma = np.array([o.gamma for o in obs])
        tau_max = 10 * float(np.max(eta**2)) + 1
        ll = marginal_loglik(a, eta, gamma)
        assert ll >= marginal_loglik(0.0, eta, gamma) - 1e-9
        assert ll >= marginal_loglik(tau_max, eta, gamma) - 1e-9
        assert 0.0 <= a <= tau_max

    def test_rejects_bad_observation(self):
        with pytest.raises(InvalidInputError):
            CuratedObservation(1.0, 0.0)


class TestLambda:
    def test_conditional_substitution(self):
        ig = lambda_conditional(0.0, HyperParameters(m0=0.0, tau=1.0, a=1, b=1))
        assert (ig.shape, ig.scale) == (1.0, 0.5)

    def test_conditional_general(self):
        ig = lambda_conditional(1.0, HyperParameters(m0=0.0, tau=2.0, a=3, b=2))
        assert (ig.shape, ig.scale) == (2.0, 1.25)

    def test_mode_identity(self):
        rng = np.random.default_rng(4)
        for t, tau, m0 in zip(rng.normal(0, 5, 100), rng.uniform(0.01, 10, 100), rng.normal(0, 2, 100)):
            ig = lambda_conditional(float(t), HyperParameters(m0=float(m0), tau=float(tau)))
            assert ig.mode() == lambda_mode(float(t), float(tau), float(m0))

    @pytest.mark.parametrize("t, tau, m0, expected", [(0.0, 1.0, 0.0, 0.25), (3.0, 4.0, 1.0, 0.5)])
    def test_mode_values(self, t, tau, m0, expected):
        assert lambda_mode(t, tau, m0) == expected

    def test_mode_crossover(self):
        assert lambda_mode(math.sqrt(3.0), 1.0) == pytest.approx(1.0, rel=1e-15)

    def test_mode_rejects_zero_tau(self):
        with pytest.raises(InvalidInputError):
            lambda_mode(1.0, 0.0)

    @given(st.floats(0, 1e3), st.floats(1e-3, 1e3), st.floats(-10, 10))
    def test_mode_symmetric_and_bounded(self, d, tau, m0):
        up, down = lambda_mode(m0 + d, tau, m0), lambda_mode(m0 - d, tau, m0)
        assert up == pytest.approx(down, rel=1e-12)
        assert up >= 0.25

    @given(st.floats(0, 1e3), st.floats(1e-3, 10), st.floats(1e-3, 1e3))
    def test_mode_increasing(self, d, step, tau):
        assert lambda_mode(d + step, tau) > lambda_mode(d, tau)

    def test_inverse_gamma_moments_match_scipy(self):
        ig = InverseGammaParams(3.0, 2.0)
        ref = stats.invgamma(3.0, scale=2.0)
        assert ig.mean() == pytest.approx(ref.mean())
        assert ig.variance() == pytest.approx(ref.var())
        assert InverseGammaParams(1.0, 1.0).mean() == math.inf


def batch_means_se(x, n_batches=50):
    b = np.array_split(np.asarray(x), n_batches)
    return np.std([np.mean(c) for c in b], ddof=1) / math.sqrt(n_batches)


class TestGibbs:
    def test_pinned_theta_follows_conditional(self):
        e = ExperimentSummary("e", 1.3, 1e-6)
        hyper = HyperParameters(m0=0.0, tau=0.8, a=1, b=1)
        res = gibbs_lambda_oracle(e, hyper, iterations=100_000, seed=3)
        assert abs(res.lambda_mode_estimate / lambda_mode(1.3, 0.8) - 1) < 0.05

    def test_determinism(self):
        e = ExperimentSummary("e", 0.4, 0.5)
        hyper = HyperParameters(tau=1.0)
        a = gibbs_lambda_oracle(e, hyper, iterations=5000, seed=9)
        b = gibbs_lambda_oracle(e, hyper, iterations=5000, seed=9)
        assert np.array_equal(a.theta_draws, b.theta_draws)
        assert (a.lambda_mean, a.theta_mean) == (b.lambda_mean, b.theta_mean)

    def test_symmetric_theta_mean(self):
        res = gibbs_lambda_oracle(ExperimentSummary("e", 0.0, 1.0), HyperParameters(tau=1.0),
                                  iterations=50_000, seed=5)
        assert abs(res.theta_mean) < 3 * batch_means_se(res.theta_draws)

    def test_prior_dominant_variance(self):
        # with a = b = 1 the marginal prior on theta is Cauchy(0, sqrt(tau))
        s2, tau = 25.0, 1.0
        e = ExperimentSummary("e", 0.0, math.sqrt(s2))
        res = gibbs_lambda_oracle(e, HyperParameters(tau=tau), iterations=200_000, seed=2)
        dens = lambda t: stats.cauchy.pdf(t, scale=math.sqrt(tau)) * stats.norm.pdf(0.0, t, math.sqrt(s2))
        z = integrate.quad(dens, -np.inf, np.inf)[0]
        var = integrate.quad(lambda t: t * t * dens(t), -np.inf, np.inf)[0] / z
        assert abs(res.theta_var / var - 1) < 0.2

    @pytest.mark.parametrize("iterations, burn_in", [(10, 10), (0, 0), (10, -1)])
    def test_bad_iterations(self, iterations, burn_in):
        with pytest.raises(InvalidInputError):
            gibbs_lambda_oracle(ExperimentSummary("e", 0.0, 1.0), HyperParameters(), iterations, burn_in)
