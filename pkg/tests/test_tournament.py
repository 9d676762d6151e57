import numpy as np
import pytest
from scipy import stats

from shapelab.densities import Gaussian, UniformInterval, total_variation
from shapelab.estimators import TournamentEstimator, TournamentNet, tournament_estimate, tournament_scores


def _gauss_tv(m1, m2, s=1.0):
    return 2 * stats.norm.cdf(abs(m1 - m2) / (2 * s)) - 1


@pytest.fixture(scope="module")
def uniform_net():
    return TournamentNet((UniformInterval(0, 1), UniformInterval(0.5, 1.5)))


@pytest.fixture(scope="module")
def gaussian_net():
    means = np.arange(5) * 0.6
    return TournamentNet(tuple(Gaussian(mean=[m]) for m in means), epsilon=_gauss_tv(0, 0.6)), means


class TestWitnessSets:
    def test_shifted_uniforms(self, uniform_net):
        (w,) = uniform_net.witnesses
        assert (w.i, w.j) == (0, 1)
        assert len(w.intervals) == 1
        a, b = w.intervals[0]
        assert b == pytest.approx(0.5, abs=1e-9)
        assert a <= 0.0
        np.testing.assert_allclose(uniform_net.probs[:, 0], [0.5, 0.0], atol=1e-9)

    def test_gaps_equal_total_variation(self, gaussian_net):
        net, means = gaussian_net
        gaps = net.witness_gaps()
        for a, w in enumerate(net.witnesses):
            assert gaps[a] == pytest.approx(_gauss_tv(means[w.i], means[w.j]), abs=1e-9)

    def test_unequal_variances_two_components(self):
        net = TournamentNet((Gaussian(mean=[0.0], cov=[[4.0]]), Gaussian(mean=[0.0])))
        (w,) = net.witnesses
        # the wide law dominates on both tails
        assert len(w.intervals) == 2
        p, q = net.candidates
        assert net.witness_gaps()[0] == pytest.approx(float(total_variation(p, q)), abs=1e-7)

    def test_planar_gaps_by_monte_carlo(self):
        net = TournamentNet((Gaussian(mean=[0, 0]), Gaussian(mean=[1, 0])), mc_budget=200_000, seed=1)
        se = np.sqrt(0.25 / 200_000)
        assert net.witness_gaps()[0] == pytest.approx(_gauss_tv(0, 1), abs=6 * se)

    def test_empirical_frequencies(self, uniform_net):
        x = np.array([[0.1], [0.2], [0.7], [1.2]])
        np.testing.assert_allclose(uniform_net.empirical(x), [0.5])

    def test_validation(self):
        with pytest.raises(ValueError):
            TournamentNet(())
        with pytest.raises(ValueError):
            TournamentNet((Gaussian(d=1), Gaussian(d=2)))


class TestSelection:
    def test_selects_true_uniform(self, uniform_net):
        picks = [tournament_estimate(UniformInterval(0, 1).sample(200, seed=s), uniform_net) for s in range(50)]
        assert picks == [0] * 50

    def test_selects_nearest_gaussian(self, gaussian_net):
        net, means = gaussian_net
        for s in range(20):
            k = s % len(means)
            x = Gaussian(mean=[means[k]]).sample(5000, seed=s)
            assert tournament_estimate(x, net) == k

    def test_scheffe_guarantee(self, gaussian_net):
        # TV(selected, truth) <= 3 min_k TV(f_k, truth) + 4 max_A |P_n(A) - P(A)|
        net, means = gaussian_net
        truth_mean = 0.85
        truth = Gaussian(mean=[truth_mean])
        for s in range(20):
            x = truth.sample(400, seed=s)
            k = tournament_estimate(x, net)
            dev = max(
                abs(np.mean([any(a < v < b for a, b in w.intervals) for v in x[:, 0]])
                    - sum(truth.cdf(np.array([b]))[0] - truth.cdf(np.array([a]))[0] for a, b in w.intervals))
                for w in net.witnesses
            )
            best = min(_gauss_tv(m, truth_mean) for m in means)
            assert _gauss_tv(means[k], truth_mean) <= 3 * best + 4 * dev + 1e-12

    def test_scores_minimised(self, gaussian_net):
        net, _ = gaussian_net
        x = Gaussian(mean=[1.2]).sample(1000, seed=3)
        scores = tournament_scores(x, net)
        assert scores.shape == (5,)
        assert tournament_estimate(x, net) == int(np.argmin(scores))

    def test_single_candidate(self):
        net = TournamentNet((Gaussian(d=1),))
        assert tournament_estimate(np.zeros((3, 1)), net) == 0


class TestEstimator:
    def test_fit(self):
        cands = [Gaussian(mean=[m]) for m in (-1.0, 0.0, 1.0)]
        model = TournamentEstimator(candidates=cands).fit(Gaussian(mean=[1.0]).sample(2000, seed=0))
        assert model.selected_index_ == 2
        assert model.density_ is cands[2]
        np.testing.assert_allclose(model.score_samples(np.zeros((1, 1))), cands[2].logpdf(np.zeros((1, 1))))
        assert model.n_features_in_ == 1
