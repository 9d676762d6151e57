import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate
from scipy.spatial import cKDTree

from shapelab._validation import rng_for
from shapelab.exceptions import DomainError, FlatHullError, InfeasiblePackingError, InvalidDimensionError
from shapelab.geometry import (
    Cap,
    IntervalFamily,
    PlanarCapFamily,
    antipodal_ball_packing,
    ball_volume,
    cap_height_for_count,
    cap_packing,
    cap_volume,
    convex_hull,
    disjointify_guarantees,
    greedy_disjointify,
    sample_ball,
    sample_cap,
    sample_sphere,
)


def _mc_ball_fraction(d, draws, seed=0, chunk=1_000_000):
    rng = np.random.default_rng(seed)
    hits = 0
    for start in range(0, draws, chunk):
        x = rng.uniform(-1, 1, size=(min(chunk, draws - start), d))
        hits += int(np.count_nonzero(np.einsum("ij,ij->i", x, x) <= 1.0))
    return hits / draws


class TestBallVolume:
    def test_disk(self):
        assert ball_volume(2, 1) == pytest.approx(np.pi, rel=1e-14)

    def test_segment(self):
        assert ball_volume(1, 1) == pytest.approx(2.0, rel=1e-14)

    def test_four_ball_against_monte_carlo(self):
        frac = _mc_ball_fraction(4, 10_000_000)
        assert ball_volume(4, 1) == pytest.approx(np.pi**2 / 2, rel=1e-13)
        assert abs(16 * frac / ball_volume(4) - 1) < 2e-3

    def test_zero_dimension_rejected(self):
        with pytest.raises(InvalidDimensionError):
            ball_volume(0, 1.0)

    def test_radius_scaling(self):
        assert ball_volume(3, 2.0) == pytest.approx(8 * ball_volume(3), rel=1e-13)

    @pytest.mark.parametrize("d", range(2, 13))
    def test_slice_recursion(self, d):
        integral, _ = integrate.quad(lambda s: (1 - s * s) ** ((d - 1) / 2), -1, 1, epsabs=0, epsrel=1e-13)
        assert ball_volume(d) == pytest.approx(ball_volume(d - 1) * integral, rel=1e-10)

    @pytest.mark.parametrize("d", range(2, 21))
    def test_consecutive_ratio_scales_as_sqrt_d(self, d):
        # vol(B_{d-1}) / vol(B_d) = sqrt(pi)^-1 Gamma(d/2 + 1) / Gamma(d/2 + 1/2),
        # which decreases from sqrt(d)/2 towards sqrt(d / (2 pi))
        ratio = ball_volume(d - 1) / ball_volume(d) / np.sqrt(d)
        assert 1 / np.sqrt(2 * np.pi) <= ratio <= 0.5


class TestCapVolume:
    def test_half_disk_limit(self):
        assert cap_volume(2, 1e-12) == pytest.approx(np.pi / 2, rel=1e-9)

    def test_three_ball_closed_form_and_monte_carlo(self):
        h = 0.5
        closed = np.pi * h * h * (3 - h) / 3
        assert cap_volume(3, 0.5) == pytest.approx(closed, rel=1e-12)
        rng = np.random.default_rng(3)
        x = sample_ball(3, 1_000_000, rng)
        est = ball_volume(3) * np.mean(x[:, 0] >= 0.5)
        assert abs(est / closed - 1) < 5e-3

    def test_asymptotic_error_is_order_one_over_d(self):
        d = 10
        ratio = cap_volume(d, 0.9, method="asymptotic") / cap_volume(d, 0.9)
        assert abs(ratio - 1) <= 3.0 / d

    @pytest.mark.parametrize("t", [0.0, 1.0, -0.2, 1.5])
    def test_domain(self, t):
        with pytest.raises(DomainError):
            cap_volume(3, t)

    def test_cap_object(self):
        with pytest.raises(ValueError):
            Cap(np.array([0.0, 2.0]), 0.5)
        cap = Cap(np.array([0.0, 1.0]), 0.5)
        assert cap.volume() == pytest.approx(cap_volume(2, 0.5))
        assert cap.contains(np.array([[0, 0.9], [0, 0.1]])).tolist() == [True, False]

    @given(st.integers(2, 6), st.floats(0.05, 0.95))
    @settings(max_examples=30, deadline=None)
    def test_sampled_cap_points_lie_in_cap(self, d, t):
        rng = np.random.default_rng(0)
        center = sample_sphere(d, 1, rng)[0]
        pts = sample_cap(center, t, 200, rng)
        assert np.all(pts @ center >= t - 1e-12)
        assert np.all(np.linalg.norm(pts, axis=1) <= 1 + 1e-12)


class TestConvexHull:
    def test_triangle(self):
        pts = np.array([[0, 0], [1, 0], [0, 1.0]])
        body = convex_hull(pts)
        assert len(body.vertices) == 3
        assert body.volume == pytest.approx(0.5)

    def test_interior_point_dropped(self):
        pts = np.array([[0, 0], [1, 0], [1, 1], [0, 1], [0.5, 0.5]])
        body = convex_hull(pts)
        assert len(body.vertices) == 4
        assert body.volume == pytest.approx(1.0)
        assert not any(np.allclose(v, [0.5, 0.5]) for v in body.vertices)

    def test_area_against_monte_carlo(self):
        pts = sample_ball(2, 1000, np.random.default_rng(1))
        body = convex_hull(pts)
        est, se = body.mc_volume(budget=1_000_000, seed=2)
        assert abs(est - body.volume) <= 3 * se

    def test_three_dimensional_volume(self):
        cube = np.array(list(itertools.product([0.0, 2.0], repeat=3)))
        body = convex_hull(np.vstack([cube, [[1, 1, 1]]]))
        assert body.volume == pytest.approx(8.0)
        assert body.contains(np.array([[1, 1, 1], [3, 0, 0]])).tolist() == [True, False]

    def test_planar_membership_matches_facets(self):
        rng = np.random.default_rng(5)
        body = convex_hull(rng.standard_normal((60, 2)))
        q = rng.standard_normal((5000, 2)) * 1.5
        by_facets = np.all(q @ body.normals.T + body.offsets <= 1e-12, axis=1)
        np.testing.assert_array_equal(body.contains(q), by_facets)

    def test_collinear_points_raise_with_rank(self):
        pts = np.array([[0, 0], [1, 1], [2, 2.0]])
        with pytest.raises(FlatHullError) as info:
            convex_hull(pts)
        assert info.value.rank == 1

    def test_one_dimensional_interval(self):
        body = convex_hull(np.array([0.3, -1.0, 2.0]))
        assert body.volume == pytest.approx(3.0)


def _brute_feasible(fam, v, c):
    """All subsets whose members keep residual >= vc/2 (exact arithmetic)."""
    N = len(fam)
    out = []
    for r in range(1, N + 1):
        for subset in itertools.combinations(range(N), r):
            if all(fam.residual(i, subset) >= v * c / 2 - 1e-12 for i in subset):
                out.append(subset)
    return out


class TestGreedyDisjointify:
    def test_disjoint_sets_all_kept(self):
        fam = IntervalFamily([[k, k + 0.5] for k in range(6)])
        assert greedy_disjointify(fam) == list(range(6))

    def test_identical_copies_keep_one(self):
        fam = IntervalFamily([[0, 1]] * 5)
        assert greedy_disjointify(fam) == [4]

    def test_sliding_intervals_against_brute_force(self):
        fam = IntervalFamily([[k / 10, k / 10 + 0.2] for k in range(9)])
        v, c = 0.2, fam.union_volume() / (9 * 0.2)
        kept = greedy_disjointify(fam, v=v, c=c)
        # hand computation: odd intervals are fully covered by their neighbours
        assert kept == [0, 2, 4, 6, 8]
        feasible = _brute_feasible(fam, v, c)
        assert tuple(kept) in feasible
        assert len(kept) >= 9 * c / 2
        assert max(len(s) for s in feasible) >= len(kept)

    @given(st.lists(st.floats(0, 5, allow_nan=False), min_size=1, max_size=12), st.floats(0.1, 2.0))
    @settings(max_examples=300, deadline=None)
    def test_guarantees_hold(self, starts, length):
        fam = IntervalFamily([[a, a + length] for a in starts])
        v = length
        c = fam.union_volume() / (len(fam) * v)
        kept = greedy_disjointify(fam, v=v, c=c)
        size_ok, residual_ok, _ = disjointify_guarantees(fam, kept, v, c)
        assert size_ok and residual_ok

    def test_planar_caps_guarantees(self):
        rng = np.random.default_rng(4)
        centers = sample_sphere(2, 40, rng)
        t = cap_height_for_count(2, 40)
        fam = PlanarCapFamily(centers, t)
        v = cap_volume(2, t)
        assert fam.volume() == pytest.approx(v, rel=1e-12)
        c = fam.union_volume() / (40 * v)
        kept = greedy_disjointify(fam, v=v, c=c)
        assert all(disjointify_guarantees(fam, kept, v, c, tol=1e-9)[:2])


class TestCapPacking:
    def test_threshold_formula(self):
        expected = np.sqrt(1 - (2 * np.pi / (100 * 2)) ** 2)
        assert cap_height_for_count(2, 100) == pytest.approx(expected, rel=1e-14)
        assert expected == pytest.approx(0.9995064, abs=1e-7)

    def test_too_few_caps(self):
        with pytest.raises(InfeasiblePackingError):
            cap_packing(2, 1)
        with pytest.raises(InfeasiblePackingError):
            cap_height_for_count(3, 2)

    def test_kept_count_and_residual_invariant(self):
        counts = []
        for seed in range(20):
            pk = cap_packing(2, 100, seed=seed)
            counts.append(pk.k_kept)
            assert np.all(pk.residual_volumes >= 0.5 * pk.c3 * pk.per_cap_volume - 1e-12)
            assert np.allclose(np.linalg.norm(pk.centers, axis=1), 1.0)
        assert min(counts) >= 25

    def test_union_volume_sandwich(self):
        pk = cap_packing(2, 60, seed=1)
        fam = pk.set_family()
        union = fam.union_volume()
        assert union <= pk.n_requested * pk.per_cap_volume
        assert union >= pk.k_kept * pk.c3 * pk.per_cap_volume * 0.5

    def test_three_dimensional_records_size_condition(self):
        pk = cap_packing(3, 40, seed=0, mc_budget=20_000)
        assert pk.method == "mc" and pk.meets_size_condition is False
        assert pk.k_kept >= 40 * pk.c3 / 2
        assert set(pk.to_dict()) >= {"t", "centers", "union_fraction"}

    def test_deterministic(self):
        a, b = cap_packing(2, 50, seed=9), cap_packing(2, 50, seed=9)
        np.testing.assert_array_equal(a.centers, b.centers)


class TestAntipodalPacking:
    def test_one_dimensional_count(self):
        pk = antipodal_ball_packing(1, 0.1, seed=0)
        x = pk.centers[:, 0]
        assert np.all(x > 0.1 - 1e-12) and np.all(x < np.sqrt(2) - 0.1 + 1e-12)
        assert pk.k >= int((np.sqrt(2) - 0.2) / 0.2)

    @pytest.mark.parametrize("d,delta", [(1, 0.05), (2, 0.05), (3, 0.04)])
    def test_disjoint_and_inside(self, d, delta):
        pk = antipodal_ball_packing(d, delta, seed=2)
        allc = pk.all_centers()
        nearest = cKDTree(allc).query(allc, k=2)[0][:, 1]
        assert nearest.min() >= 2 * delta
        assert np.all(np.linalg.norm(allc, axis=1) + delta <= np.sqrt(2 * d) + 1e-12)

    def test_planar_count_uses_recorded_constant(self):
        pk = antipodal_ball_packing(2, 0.05, seed=0)
        c = pk.packing_constant
        assert pk.k >= (0.5 * c) ** 2 * ball_volume(2, 2.0) / ball_volume(2, 0.05) * (1 - 1e-12)
        assert c > 0.5

    def test_delta_domain(self):
        with pytest.raises(DomainError):
            antipodal_ball_packing(2, 0.2, C=1.0)


class TestSampling:
    def test_uniform_disk_mean(self):
        x = sample_ball(2, 100_000, rng_for(0))
        se = np.sqrt(0.25 / 100_000)
        assert np.all(np.abs(x.mean(axis=0)) < 3 * se * 1.5)
