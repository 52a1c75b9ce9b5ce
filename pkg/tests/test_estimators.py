import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bhs import (
    DegenerateDenominatorError,
    ExperimentSummary,
    HyperParameters,
    InvalidInputError,
    UnitData,
    UnsupportedHyperparameterError,
    aggregate,
    face_value_estimate,
    global_posterior,
    hybrid_posterior,
    lambda_conditional,
    shrinkage_gap,
    shrinkage_posterior,
)
from bhs.estimators import ratio_estimate, shrink_arrays
from bhs.models import PosteriorSummary


def exp(theta_hat, sigma_sq):
    return ExperimentSummary("e", theta_hat, math.sqrt(sigma_sq))


class TestFaceValue:
    def test_ratio_of_means(self):
        data = UnitData([2, 4, 1, 1], [1, 1, 0, 0])
        assert face_value_estimate(data, "ratio").theta_hat == 3.0

    def test_identity_case(self):
        data = UnitData([5, 5, 5, 5, 5], [1, 0, 1, 0, 0])
        assert ratio_estimate(data, "ratio") == 1.0
        assert ratio_estimate(data, "ratio_minus_one") == 0.0
        # no variation at all gives a zero standard error, which is rejected
        with pytest.raises(InvalidInputError):
            face_value_estimate(data, "ratio")

    def test_conventions_differ_by_one(self):
        data = UnitData([5.2, 5.0, 4.8, 5.1, 4.9, 5.3], [1, 0, 1, 0, 1, 1])
        a = face_value_estimate(data, "ratio")
        b = face_value_estimate(data, "ratio_minus_one")
        assert a.theta_hat - 1.0 == b.theta_hat
        assert a.sigma_hat == b.sigma_hat

    def test_zero_control_mean(self):
        with pytest.raises(DegenerateDenominatorError):
            face_value_estimate(UnitData([1.0, 2.0, 1.0, -1.0], [1, 1, 0, 0]))

    @pytest.mark.parametrize(
        "y, z",
        [([1.0, 2.0], [1, 1]), ([1.0, 2.0], [0, 0]), ([1.0], [1]), ([1.0, 2.0], [1, 2]),
         ([1.0, 2.0, 3.0], [1, 0])],
    )
    def test_invalid_units(self, y, z):
        with pytest.raises(InvalidInputError):
            UnitData(y, z)

    @pytest.mark.slow
    def test_delta_method_matches_bootstrap(self):
        rng = np.random.default_rng(7)
        y_t = rng.normal(10.5, 3.0, 500)
        y_c = rng.normal(10.0, 3.0, 500)
        data = UnitData(np.concatenate([y_t, y_c]), np.repeat([1, 0], 500))
        se = face_value_estimate(data, "ratio").sigma_hat

        # stratified nonparametric bootstrap, 1e5 resamples
        boot = np.random.default_rng(11)
        ratios = []
        for _ in range(10):
            it = boot.integers(0, 500, (10_000, 500))
            ic = boot.integers(0, 500, (10_000, 500))
            ratios.append(y_t[it].mean(axis=1) / y_c[ic].mean(axis=1))
        boot_se = np.std(np.concatenate(ratios), ddof=1)
        assert abs(se / boot_se - 1) < 0.05


class TestShrinkagePosterior:
    def test_equal_precision(self):
        p = shrinkage_posterior(exp(2.0, 1.0), HyperParameters(m0=0.0, tau=1.0), 1.0)
        assert p.mean == 1.0
        assert p.variance == 0.5

    @pytest.mark.parametrize("lam_tau", [0.01, 1.0, 250.0])
    def test_prior_mean_equals_observation(self, lam_tau):
        p = shrinkage_posterior(exp(7.0, 2.0), HyperParameters(m0=7.0, tau=lam_tau), 1.0)
        assert p.mean == 7.0

    def test_likelihood_dominant(self):
        p = shrinkage_posterior(exp(2.0, 1e-12), HyperParameters(tau=1.0), 1.0)
        assert abs(p.mean - 2.0) < 1e-6

    def test_interval(self):
        p = shrinkage_posterior(exp(2.0, 1.0), HyperParameters(tau=1.0), 1.0, level=0.9)
        half = 1.6448536269514722 * math.sqrt(0.5)
        assert p.interval_lo == pytest.approx(1.0 - half, rel=1e-14)
        assert p.interval_hi == pytest.approx(1.0 + half, rel=1e-14)

    @pytest.mark.parametrize("lam", [0.0, -1.0, math.nan])
    def test_rejects_bad_lambda(self, lam):
        with pytest.raises(InvalidInputError):
            shrinkage_posterior(exp(1.0, 1.0), HyperParameters(), lam)

    def test_rejects_bad_level(self):
        with pytest.raises(InvalidInputError):
            shrinkage_posterior(exp(1.0, 1.0), HyperParameters(), 1.0, level=1.0)

    def test_types_reject_bad_inputs(self):
        with pytest.raises(InvalidInputError):
            ExperimentSummary("e", 1.0, 0.0)
        with pytest.raises(InvalidInputError):
            ExperimentSummary("e", math.inf, 1.0)
        with pytest.raises(InvalidInputError):
            HyperParameters(tau=0.0)


class TestGlobalPosterior:
    def test_reduction(self):
        p = global_posterior(exp(2.0, 1.0), HyperParameters(m0=0.0, tau=1.0))
        assert p.mean == 1.0
        assert p.lambda_used == 1.0

    @pytest.mark.parametrize("tau, s2", [(0.1, 3.0), (1.0, 1.0), (50.0, 0.01)])
    def test_zero(self, tau, s2):
        assert global_posterior(exp(0.0, s2), HyperParameters(tau=tau)).mean == 0.0

    def test_unbounded_gap(self):
        p = global_posterior(exp(10.0, 1.0), HyperParameters(tau=1.0))
        assert p.mean == 5.0
        assert abs(p.mean - 10.0) == shrinkage_gap(10.0, 1.0, 1.0, "global")


class TestHybridPosterior:
    def test_zero_deviation(self):
        p = hybrid_posterior(exp(0.3, 1.0), HyperParameters(m0=0.3, tau=1.0))
        assert p.lambda_used == 0.25

    def test_crossover(self):
        p = hybrid_posterior(exp(math.sqrt(3.0), 1.0), HyperParameters(tau=1.0))
        # sqrt(3)^2 carries one rounding, so equality is up to an ulp
        assert p.lambda_used == pytest.approx(1.0, rel=1e-15)
        g = global_posterior(exp(math.sqrt(3.0), 1.0), HyperParameters(tau=1.0))
        assert p.mean == pytest.approx(g.mean, rel=1e-15)

    def test_far_observation(self):
        p = hybrid_posterior(exp(100.0, 1.0), HyperParameters(tau=1.0))
        # lambda* tau = 10001/4, mean = 100 * 10001 / 10005
        assert abs(p.mean - 100.0) == pytest.approx(400 / 10005, rel=1e-12)
        assert abs(400 / 10005 - 0.039980) < 1e-6

    def test_rejects_general_hyperparameters(self):
        with pytest.raises(UnsupportedHyperparameterError):
            hybrid_posterior(exp(1.0, 1.0), HyperParameters(a=2.0, b=1.0))

    def test_lambda_matches_conditional_mode(self):
        rng = np.random.default_rng(3)
        for t, tau, m0 in zip(rng.normal(0, 3, 200), rng.uniform(0.01, 5, 200), rng.normal(0, 1, 200)):
            hyper = HyperParameters(m0=float(m0), tau=float(tau))
            p = hybrid_posterior(ExperimentSummary("e", float(t), 0.5), hyper)
            assert p.lambda_used == lambda_conditional(float(t), hyper).mode()


class TestShrinkageGap:
    def test_zero(self):
        assert shrinkage_gap(0.0, 1.0, 1.0, "hybrid") == 0.0
        assert shrinkage_gap(0.0, 1.0, 1.0, "global") == 0.0

    def test_rejects_zero_tau(self):
        with pytest.raises(InvalidInputError):
            shrinkage_gap(2.0, 1.0, 0.0, "hybrid")

    def test_peak_location(self):
        tau = 1e-12
        scan = np.linspace(0.0, 100.0, 1_000_001)
        gaps = np.array([shrinkage_gap(t, 1.0, tau) for t in scan[::100]])
        peak = scan[::100][int(np.argmax(gaps))]
        assert abs(peak - math.sqrt(tau + 4.0)) < 1e-2
        assert shrinkage_gap(2.0, 1.0, tau) == pytest.approx(1.0, abs=1e-12)
        assert gaps.max() <= 2.0 / math.sqrt(tau + 4.0) + 1e-15

    def test_matches_hybrid_posterior(self):
        p = hybrid_posterior(exp(100.0, 1.0), HyperParameters(tau=1.0))
        assert shrinkage_gap(100.0, 1.0, 1.0) == pytest.approx(abs(p.mean - 100.0), abs=1e-12)
        assert shrinkage_gap(100.0, 1.0, 1.0) == pytest.approx(400 / 10005, rel=1e-15)

    def test_redescending(self):
        assert shrinkage_gap(1e3, 1.0, 1.0) < shrinkage_gap(10.0, 1.0, 1.0)
        tail = [shrinkage_gap(t, 1.0, 1.0) for t in np.linspace(math.sqrt(5.0), 1e4, 500)]
        assert all(a >= b for a, b in zip(tail, tail[1:]))

    @given(st.floats(1e-3, 1e6), st.floats(1e-3, 1e3), st.floats(1e-3, 1e3))
    def test_global_ratio_constant(self, t, s2, tau):
        assert shrinkage_gap(t, s2, tau, "global") / t == pytest.approx(s2 / (tau + s2), rel=1e-12)


class TestAggregate:
    def _p(self, mean, var):
        return PosteriorSummary(mean, var, 1.0, 0.9, mean, mean)

    def test_sum(self):
        a = aggregate([self._p(1, 0.5), self._p(2, 0.5)])
        assert (a.mean, a.variance, a.n_experiments) == (3.0, 1.0, 2)

    def test_four_copies(self):
        a = aggregate([self._p(0, 1)] * 4)
        assert (a.mean, a.variance) == (0.0, 4.0)
        assert a.interval_hi == pytest.approx(1.6448536269514722 * 2, rel=1e-14)

    def test_empty(self):
        with pytest.raises(InvalidInputError):
            aggregate([])

    def test_converges_to_total(self):
        rng = np.random.default_rng(5)
        theta = rng.normal(0, 1, 500)
        s = 1e-3
        exps = [ExperimentSummary(str(i), float(t + s * rng.standard_normal()), s) for i, t in enumerate(theta)]
        agg = aggregate(hybrid_posterior(e, HyperParameters(tau=1.0)) for e in exps)
        assert agg.contains(float(theta.sum()))
        assert agg.width < 0.1

    @given(
        st.lists(st.tuples(st.floats(-1e3, 1e3), st.floats(1e-3, 1e3)), min_size=1, max_size=20),
        st.lists(st.tuples(st.floats(-1e3, 1e3), st.floats(1e-3, 1e3)), min_size=1, max_size=20),
    )
    def test_linearity(self, xs, ys):
        px = [self._p(m, v) for m, v in xs]
        py = [self._p(m, v) for m, v in ys]
        whole = aggregate(px + py)
        a, b = aggregate(px), aggregate(py)
        assert whole.mean == pytest.approx(a.mean + b.mean, abs=1e-9)
        assert whole.variance == pytest.approx(a.variance + b.variance, rel=1e-12)


finite = dict(allow_nan=False, allow_infinity=False)


@settings(max_examples=300)
@given(
    theta_hat=st.floats(-1e4, 1e4, **finite),
    sigma_hat=st.floats(1e-3, 1e3, **finite),
    m0=st.floats(-1e3, 1e3, **finite),
    tau=st.floats(1e-3, 1e3, **finite),
    lam=st.floats(1e-3, 1e3, **finite),
)
def test_posterior_properties(theta_hat, sigma_hat, m0, tau, lam):
    e = ExperimentSummary("e", theta_hat, sigma_hat)
    p = shrinkage_posterior(e, HyperParameters(m0=m0, tau=tau), lam)
    assert min(m0, theta_hat) <= p.mean <= max(m0, theta_hat)
    assert p.variance < min(sigma_hat**2, lam * tau)
    assert p.variance <= sigma_hat**2
    assert p.interval_lo <= p.mean <= p.interval_hi


@given(theta_hat=st.floats(-1e3, 1e3, **finite), m0=st.floats(-10, 10, **finite))
def test_consistency_at_small_variance(theta_hat, m0):
    s2 = 1e-8
    hyper = HyperParameters(m0=m0, tau=1.0)
    p = hybrid_posterior(ExperimentSummary("e", theta_hat, math.sqrt(s2)), hyper)
    bound = 10 * s2 * (abs(theta_hat - m0) + 1) / (p.lambda_used * hyper.tau)
    assert abs(p.mean - theta_hat) <= bound


def test_arrays_match_scalar_path():
    rng = np.random.default_rng(0)
    th = rng.normal(0, 2, 50)
    sd = rng.uniform(0.1, 2, 50)
    hyper = HyperParameters(m0=0.1, tau=0.7)
    for name, fn in (("global", global_posterior), ("hybrid", hybrid_posterior)):
        arr = shrink_arrays(th, sd, hyper.m0, hyper.tau, name)
        for i in range(50):
            p = fn(ExperimentSummary("e", float(th[i]), float(sd[i])), hyper)
            assert arr.mean[i] == p.mean
            assert arr.variance[i] == p.variance
            assert arr.lo[i] == p.interval_lo
