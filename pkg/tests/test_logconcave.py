import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats
from scipy.optimize import minimize

from shapelab.estimators import LogConcaveMLE1D, MLE1D, logconcave_mle_1d
from shapelab.exceptions import DegenerateSampleError


def _exp_integral(a, b, width):
    """int of exp over a segment with linear log-density from a to b."""
    t = b - a
    small = np.abs(t) < 1e-12
    return width * np.exp(a) * np.where(small, 1 + t / 2, np.expm1(t) / np.where(small, 1, t))


def _oracle_objective(x):
    """Maximise the penalised likelihood over concave knot values by SLSQP."""
    ux, counts = np.unique(x, return_counts=True)
    w = counts / counts.sum()
    h = np.diff(ux)

    def neg(phi):
        return -(w @ phi - _exp_integral(phi[:-1], phi[1:], h).sum())

    def concave(phi):
        s = np.diff(phi) / h
        return s[:-1] - s[1:]

    phi0 = np.full(len(ux), -np.log(ux[-1] - ux[0]))
    res = minimize(neg, phi0, constraints=[{"type": "ineq", "fun": concave}], method="SLSQP",
                   options={"ftol": 1e-13, "maxiter": 2000})
    return -res.fun


def _objective(fit, x):
    return np.mean(fit.logpdf(x[:, None])) - fit.integral()


class TestSmallSamples:
    def test_two_points_uniform(self):
        fit = logconcave_mle_1d([0.0, 1.0])
        np.testing.assert_allclose(fit.log_values, 0.0, atol=1e-12)
        assert fit.support == (0.0, 1.0)

    def test_degenerate(self):
        with pytest.raises(DegenerateSampleError):
            logconcave_mle_1d([2.0, 2.0, 2.0])
        with pytest.raises(ValueError):
            logconcave_mle_1d([1.0])

    def test_weights_validated(self):
        with pytest.raises(ValueError):
            logconcave_mle_1d([0.0, 1.0, 2.0], weights=[1.0, -1.0, 1.0])

    def test_integer_weights_match_repeats(self):
        a = logconcave_mle_1d([0.0, 0.5, 2.0], weights=[1, 3, 1])
        b = logconcave_mle_1d([0.0, 0.5, 0.5, 0.5, 2.0])
        np.testing.assert_allclose(a.log_values, b.log_values, atol=1e-8)


class TestOptimality:
    @pytest.mark.parametrize("seed", range(4))
    def test_matches_generic_solver(self, seed):
        x = np.random.default_rng(seed).normal(size=15)
        fit = logconcave_mle_1d(x)
        assert _objective(fit, x) == pytest.approx(_oracle_objective(x), abs=1e-6)
        assert _objective(fit, x) >= _oracle_objective(x) - 1e-9

    @pytest.mark.parametrize("dist", [stats.norm(), stats.beta(2, 2), stats.expon(), stats.uniform()])
    def test_structure(self, dist):
        x = dist.rvs(size=500, random_state=3)
        fit = logconcave_mle_1d(x)
        assert fit.integral() == pytest.approx(1.0, abs=1e-10)
        slopes = np.diff(fit.log_values) / np.diff(fit.knots)
        assert np.all(np.diff(slopes) <= 1e-8)
        assert fit.gap <= 1e-8

    @given(st.lists(st.floats(-10, 10), min_size=3, max_size=60, unique=True))
    @settings(max_examples=60, deadline=None)
    def test_mean_equals_sample_mean(self, data):
        x = np.array(data)
        if np.ptp(x) < 1e-3:
            return
        fit = logconcave_mle_1d(x)
        assert fit.mean() == pytest.approx(x.mean(), abs=1e-6 * (1 + np.ptp(x)))

    def test_variance_does_not_exceed_sample_variance(self):
        x = stats.gamma(3).rvs(size=400, random_state=1)
        fit = logconcave_mle_1d(x)
        grid = np.linspace(*fit.support, 20001)
        pdf = fit.pdf(grid[:, None])
        var = integrate.trapezoid((grid - fit.mean()) ** 2 * pdf, grid)
        assert var <= x.var() * (1 + 1e-4)

    def test_affine_equivariance(self):
        x = np.random.default_rng(5).normal(size=100)
        a = logconcave_mle_1d(x)
        b = logconcave_mle_1d(3 * x + 2)
        np.testing.assert_allclose(b.log_values, a.log_values - np.log(3), atol=1e-7)


@pytest.fixture(scope="module")
def fit():
    return logconcave_mle_1d(stats.norm().rvs(size=300, random_state=7))


class TestDensityMethods:
    def test_cdf_matches_integral(self, fit):
        for q in (-1.0, 0.0, 0.7):
            val, _ = integrate.quad(lambda s: fit.pdf(np.array([[s]]))[0], fit.support[0], q,
                                    points=fit.knots[(fit.knots > fit.support[0]) & (fit.knots < q)][:50],
                                    limit=500)
            assert fit.cdf(q)[0] == pytest.approx(val, abs=1e-7)

    def test_outside_support(self, fit):
        assert fit.logpdf(np.array([[fit.support[1] + 1]]))[0] == -np.inf
        assert fit.cdf(fit.support[0] - 1)[0] == 0.0

    def test_samples_follow_fit(self, fit):
        x = fit.sample(5000, seed=2)[:, 0]
        assert stats.kstest(x, fit.cdf).statistic <= 1.63 / np.sqrt(5000)

    def test_hellinger_against_quadrature(self, fit):
        truth = stats.norm()
        exact = fit.hellinger_sq(lambda p: truth.pdf(p[:, 0]), truth_cdf=lambda p: truth.cdf(p[:, 0]))

        def integrand(s):
            return (np.sqrt(fit.pdf(np.array([[s]]))[0]) - np.sqrt(truth.pdf(s))) ** 2

        inner, _ = integrate.quad(integrand, *fit.support, limit=1000, points=fit.breakpoints()[:50])
        tails = truth.cdf(fit.support[0]) + truth.sf(fit.support[1])
        assert exact == pytest.approx(0.5 * (inner + tails), rel=1e-6)
        bounded = fit.hellinger_sq(lambda p: truth.pdf(p[:, 0]), lo=-12, hi=12)
        assert bounded == pytest.approx(exact, rel=1e-6)

    def test_serialisation(self, fit):
        payload = fit.to_dict()
        assert payload["knots"] == fit.knots.tolist()
        assert isinstance(fit, MLE1D)


class TestEstimator:
    def test_fit_and_score(self):
        x = stats.norm().rvs(size=200, random_state=0)[:, None]
        model = LogConcaveMLE1D().fit(x)
        assert model.n_features_in_ == 1
        assert model.score(x) == pytest.approx(np.sum(model.density_.logpdf(x)))
        assert model.sample(10, random_state=1).shape == (10, 1)
        assert model.get_params() == {"tol": 1e-10}

    def test_rejects_multivariate(self):
        with pytest.raises(ValueError):
            LogConcaveMLE1D().fit(np.zeros((5, 2)))
