"""Acceptance suite: one group of tests per criterion, at the stated tolerances.

Run with ``pytest tests/test_acceptance.py -v``; the terminal summary prints a
PASS/FAIL line per criterion.  The Monte-Carlo rate experiments are marked
``slow`` (``-m "not slow"`` skips them).
"""

import itertools
import subprocess
import sys
from fractions import Fraction

import numpy as np
import pytest
from scipy import integrate, stats

from shapelab.densities import (
    BumpFamilyDensity,
    Gaussian,
    bump_profile,
    hellinger_sq,
    make_bump_family,
    total_variation,
    verify_log_concave,
)
from shapelab.empirical_process import (
    EntropyModel,
    binomial_max_bound_check,
    optimal_chaining_bound,
)
from shapelab.estimators import TournamentNet, tournament_estimate, tournament_scores
from shapelab.exceptions import OutOfRegimeError
from shapelab.experiments import ExperimentConfig, run_experiment
from shapelab.geometry import IntervalFamily, greedy_disjointify
from shapelab.lower_bounds import minimax_lb_report


def _slope_detail(report):
    return f"slope {report.slope:+.4f} (target {report.target:+.4f} +- {report.tolerance})"


# ---------------------------------------------------------------------------
# 1. hull deficit exponents
# ---------------------------------------------------------------------------


@pytest.mark.criterion(1)
class TestHullDeficit:
    def test_line(self, record_property):
        rep = run_experiment(ExperimentConfig(kind="hull-deficit", dim=1, seed=0))
        record_property("detail", "d=1 " + _slope_detail(rep))
        assert rep.tolerance == 0.05
        assert rep.passed
        # exact expectation 2/(n+1) for n uniform points on [-1, 1]
        for n, risk in rep.mean_risk().items():
            assert risk == pytest.approx(2 / (n + 1), rel=0.1)

    @pytest.mark.slow
    @pytest.mark.parametrize("d", [2, 3])
    def test_ball(self, d, record_property):
        rep = run_experiment(ExperimentConfig(kind="hull-deficit", dim=d, seed=0))
        record_property("detail", f"d={d} " + _slope_detail(rep))
        assert set(rep.mean_risk()) == {2**k for k in range(7, 14)}
        assert len(rep.rows) == 7 * 200
        assert rep.tolerance == 0.08
        assert rep.passed


# ---------------------------------------------------------------------------
# 2. convex least squares regression rate
# ---------------------------------------------------------------------------


@pytest.mark.criterion(2)
@pytest.mark.slow
class TestConvexRegressionRate:
    def test_line(self, record_property):
        rep = run_experiment(ExperimentConfig(kind="convreg-rate", dim=1, seed=0))
        record_property("detail", "d=1 " + _slope_detail(rep))
        assert max(rep.mean_risk()) == 2**12 and len(rep.rows) == 7 * 50
        assert rep.passed

    def test_disk(self, record_property):
        # n up to 2^10: the cutting-plane QP costs ~9 s per fit at n = 1024
        rep = run_experiment(ExperimentConfig(kind="convreg-rate", dim=2, nmax=2**10, grid=5, seed=0))
        record_property("detail", "d=2 " + _slope_detail(rep))
        assert len(rep.rows) == 5 * 50
        assert rep.passed


# ---------------------------------------------------------------------------
# 3. log-concave MLE Hellinger rate
# ---------------------------------------------------------------------------


@pytest.mark.criterion(3)
@pytest.mark.slow
def test_logconcave_mle_rate(record_property):
    rep = run_experiment(ExperimentConfig(kind="mle1d-rate", seed=0))
    record_property("detail", "beta(2,2) truth " + _slope_detail(rep))
    assert max(rep.mean_risk()) == 2**13 and len(rep.rows) == 7 * 50
    assert rep.passed


# ---------------------------------------------------------------------------
# 4. lower-bound exponents
# ---------------------------------------------------------------------------


@pytest.mark.criterion(4)
@pytest.mark.slow
class TestLowerBoundExponents:
    grid = [10**2, 10**3, 10**4, 10**5]

    def test_caps(self, record_property):
        rep = minimax_lb_report(2, self.grid, seeds=(0, 1, 2, 3), bumps=False)["hellinger_lb"]
        record_property("detail", f"caps d=2 slope {rep['slope']:+.4f} (target -0.6667 +- 0.05)")
        assert abs(rep["slope"] + 2 / 3) <= 0.05

    def test_bumps(self, record_property):
        rep = minimax_lb_report(1, self.grid, seeds=(0, 1))["tv_lb"]
        record_property("detail", f"bumps d=1 slope {rep['slope']:+.4f} (target -0.4 +- 0.05)")
        assert abs(rep["slope"] + 0.4) <= 0.05
        bounds = [r["bound"] for r in rep["rows"] if r["seed"] == 0]
        assert np.all(np.diff(bounds) < 0)


# ---------------------------------------------------------------------------
# 5. family separation laws
# ---------------------------------------------------------------------------


@pytest.mark.criterion(5)
def test_bump_separation_laws(record_property):
    deltas = np.array([0.2, 0.1, 0.05])
    h2, tv = [], []
    for delta in deltas:
        on = BumpFamilyDensity([[1.0]], delta, [1])
        off = BumpFamilyDensity([[1.0]], delta, [0])
        h2.append(float(hellinger_sq(on, off)))
        tv.append(float(total_variation(on, off)))
    h2, tv = np.array(h2), np.array(tv)
    a_h = stats.linregress(np.log(deltas), np.log(h2)).slope
    a_tv = stats.linregress(np.log(deltas), np.log(tv)).slope
    ratio = tv / h2
    steps = ratio[:-1] / ratio[1:]
    record_property("detail", f"h2 ~ delta^{a_h:.3f}, TV ~ delta^{a_tv:.3f}, ratio steps {np.round(steps, 4).tolist()}")
    assert abs(a_h - 5) <= 0.5
    assert abs(a_tv - 3) <= 0.3
    # TV/h^2 ~ delta^-2, so halving delta multiplies the ratio by 4
    assert np.all(np.abs(steps - 0.25) <= 0.25 * 0.25)


# ---------------------------------------------------------------------------
# 6. log-concavity checks
# ---------------------------------------------------------------------------


@pytest.mark.criterion(6)
class TestLogConcavity:
    @pytest.mark.parametrize("d,delta", [(1, 0.1), (2, 0.1), (2, 0.05)])
    def test_valid_families(self, d, delta, record_property):
        rep = verify_log_concave(make_bump_family(d, delta), n_lines=100, seed=0)
        record_property("detail", f"d={d} delta={delta} max violation {rep['max_violation']:.2e}")
        assert rep["max_violation"] <= 1e-7

    def test_overlapping_family_flagged(self, record_property):
        delta = 0.3
        f = BumpFamilyDensity([[0.5], [0.5 + 0.5 * delta], [0.5 + delta]], delta, [1, 1, 1])
        rep = verify_log_concave(f, n_lines=100, seed=0,
                                 segments=[(np.array([0.4]), np.array([0.5 + 1.1 * delta]))])
        record_property("detail", f"overlapping bumps violation {rep['max_violation']:.2e}")
        assert not f.is_log_concave
        assert rep["max_violation"] > 1e-7


# ---------------------------------------------------------------------------
# 7. normalisation constants
# ---------------------------------------------------------------------------


def _normalizer_by_direct_quadrature(f):
    """1 + sum of int gamma(x) (e^{g(|x-y|)} - 1) over every bump ball, in Cartesian/polar form."""
    delta = f.delta
    total = 1.0
    for y in f.active:
        if f.d == 1:
            val, _ = integrate.quad(lambda x: stats.norm.pdf(x) * np.expm1(bump_profile(abs(x - y[0]), delta)),
                                    y[0] - delta, y[0] + delta, epsabs=0, epsrel=1e-12, points=[y[0]])
        else:
            def inner(r):
                return integrate.quad(
                    lambda th: np.exp(-0.5 * np.sum((y + r * np.array([np.cos(th), np.sin(th)])) ** 2)) / (2 * np.pi),
                    0, 2 * np.pi, epsabs=0, epsrel=1e-11)[0]
            val, _ = integrate.quad(lambda r: r * np.expm1(bump_profile(r, delta)) * inner(r),
                                    0, delta, epsabs=0, epsrel=1e-10)
        total += val
    return total


@pytest.mark.criterion(7)
class TestNormalisation:
    @pytest.mark.parametrize("d,delta", [(1, 0.1), (1, 0.05), (1, 0.02), (2, 0.1), (2, 0.05), (2, 0.02)])
    def test_range(self, d, delta, record_property):
        C = make_bump_family(d, delta).normalizer
        record_property("detail", f"d={d} delta={delta}: (C-1)/delta^2 = {(C - 1) / delta**2:.4f}")
        assert 1.0 < C < 1.0 + delta**2

    @pytest.mark.parametrize("d,delta", [(1, 0.1), (1, 0.05), (2, 0.1)])
    def test_against_direct_quadrature(self, d, delta):
        f = make_bump_family(d, delta)
        assert f.normalizer == pytest.approx(_normalizer_by_direct_quadrature(f), abs=1e-6)


# ---------------------------------------------------------------------------
# 8. chaining and fixed points
# ---------------------------------------------------------------------------


@pytest.mark.criterion(8)
class TestChainingFixedPoint:
    @pytest.mark.parametrize("d", range(4, 11))
    def test_fixed_point_exponent(self, d, record_property):
        rep = run_experiment(ExperimentConfig(kind="fixed-point", dim=d))
        record_property("detail", f"d={d} eps^2 slope {rep.slope:+.9f}")
        assert rep.target == pytest.approx(-2 / (d + 1), abs=1e-15)
        assert abs(rep.slope - rep.target) <= 1e-6

    def test_chaining_ratio(self, record_property):
        model = EntropyModel(1.0, 1.5)
        n = 10**20
        ratio = optimal_chaining_bound(model, 16 * n)[1] / optimal_chaining_bound(model, n)[1]
        record_property("detail", f"chaining ratio {ratio:.5f} vs 16^-0.4 = {16 ** -0.4:.5f}")
        assert ratio == pytest.approx(16 ** -0.4, rel=0.01)


# ---------------------------------------------------------------------------
# 9. greedy disjointification guarantees
# ---------------------------------------------------------------------------


def _cells(iv):
    return set(range(int(iv[0]), int(iv[1])))


@pytest.mark.criterion(9)
def test_greedy_guarantees_exact(record_property):
    # integer endpoints: lengths are exact in floating point and the oracle
    # counts unit cells with rational arithmetic
    rng = np.random.default_rng(2024)
    cases = 10_000
    for _ in range(cases):
        N = int(rng.integers(1, 13))
        L = int(rng.integers(1, 11))
        starts = rng.integers(0, 40, size=N)
        intervals = np.column_stack([starts, starts + L]).astype(float)
        fam = IntervalFamily(intervals)
        cells = [_cells(iv) for iv in intervals]
        c = Fraction(len(set().union(*cells)), N * L)
        kept = greedy_disjointify(fam, v=float(L), c=float(c))
        assert Fraction(len(kept)) >= Fraction(N) * c / 2
        for i in kept:
            others = set().union(*(cells[j] for j in kept if j != i))
            assert Fraction(len(cells[i] - others)) >= L * c / 2
    record_property("detail", f"{cases} random families, N <= 12, zero violations")


# ---------------------------------------------------------------------------
# 10. binomial maximal inequality
# ---------------------------------------------------------------------------


@pytest.mark.criterion(10)
def test_binomial_maximal_inequality(record_property):
    checked, refused = 0, 0
    for k, p, n in itertools.product([2, 10, 1000], [0.01, 0.1, 0.5], [100, 10_000]):
        if np.log(k) > n * p / 3:
            with pytest.raises(OutOfRegimeError):
                binomial_max_bound_check(k, p, n, trials=10_000)
            refused += 1
            continue
        rep = binomial_max_bound_check(k, p, n, trials=10_000, seed=0)
        assert rep.lhs <= rep.rhs, (k, p, n, rep.lhs, rep.rhs)
        checked += 1
    record_property("detail", f"{checked} cells within the bound, {refused} refused (log k > np/3)")


# ---------------------------------------------------------------------------
# 11. tournament selection
# ---------------------------------------------------------------------------


@pytest.mark.criterion(11)
def test_tournament_selection(record_property):
    means = 0.6 * np.arange(5)
    net = TournamentNet(tuple(Gaussian(mean=[m]) for m in means))
    assert net.witness_gaps().min() >= 0.2
    correct = 0
    for seed in range(100):
        k = seed % 5
        x = Gaussian(mean=[means[k]]).sample(10_000, seed=seed)[:, 0]
        # independent scores: interval counts against normal cdf masses
        emp = np.array([sum(np.mean((x > a) & (x < b)) for a, b in w.intervals) for w in net.witnesses])
        probs = np.array([[sum(stats.norm.cdf(b, m) - stats.norm.cdf(a, m) for a, b in w.intervals)
                           for w in net.witnesses] for m in means])
        scores = np.abs(probs - emp).max(axis=1)
        chosen = tournament_estimate(x[:, None], net)
        np.testing.assert_allclose(tournament_scores(x[:, None], net), scores, atol=1e-12)
        assert np.all(scores[chosen] <= scores)
        correct += chosen == k
    record_property("detail", f"correct selections {correct}/100")
    assert correct >= 95


# ---------------------------------------------------------------------------
# 12. determinism
# ---------------------------------------------------------------------------

_RERUNS = [
    ["hull-deficit", "--dim", "2", "--nmin", "16", "--nmax", "256", "--grid", "3", "--trials", "5"],
    ["convreg-rate", "--dim", "2", "--nmin", "16", "--nmax", "64", "--grid", "3", "--trials", "2",
     "--eval-points", "1000"],
    ["mle1d-rate", "--nmin", "16", "--nmax", "256", "--grid", "3", "--trials", "3"],
    ["tournament-rate", "--nmin", "16", "--nmax", "256", "--grid", "3", "--trials", "3"],
    ["discrepancy", "--dim", "2", "--nmin", "16", "--nmax", "64", "--grid", "3", "--trials", "2"],
    ["verify-family", "--delta", "0.2", "--pairs", "3"],
    ["chaining-eval"],
    ["fixed-point", "--dim", "4"],
]


@pytest.mark.criterion(12)
@pytest.mark.parametrize("argv", _RERUNS, ids=[a[0] for a in _RERUNS])
def test_reruns_are_byte_identical(argv, tmp_path, record_property):
    blobs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        proc = subprocess.run([sys.executable, "-m", "shapelab.cli", *argv, "--seed", "7", "--out", str(out)],
                              capture_output=True, text=True)
        assert proc.returncode in (0, 1), proc.stderr
        files = sorted(tmp_path.glob(f"run{k}.*"))
        blobs.append([f.read_bytes() for f in files] + [proc.stdout.encode()])
    assert blobs[0] == blobs[1]
    record_property("detail", f"{argv[0]} identical")
