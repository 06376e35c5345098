import math

import numpy as np
import pytest

from stablehull import convex_geom as cg
from stablehull import sausage as S
from stablehull.mc_engine import EstimateCI
from stablehull.stable_sim import PathSkeleton, SeedStream, StableSpec, sample_path_skeleton

BM3 = StableSpec(2.0, 3, "std-bm")


def _ci(mean, se):
    return EstimateCI(100, mean, se * se * 100, 2.5758 * se, 0.99)


class TestClosedForms:
    def test_body_volume(self):
        assert S.body_volume(cg.EuclideanBall(1.0, 3)) == pytest.approx(4 * math.pi / 3)
        assert S.body_volume(cg.Polytope.cube(1.0, 3)) == pytest.approx(1.0)
        assert S.body_volume(cg.LpBall(1.0, 1.0, 2)) == pytest.approx(2.0)

    def test_spitzer_formula(self):
        assert S.spitzer_exact_3d(1, 0) == pytest.approx(4 * math.pi / 3)
        assert S.spitzer_exact_3d(1, 1) == pytest.approx(20.50, abs=0.005)
        assert S.spitzer_exact_3d(2, 0) == pytest.approx(32 * math.pi / 3)
        with pytest.raises(ValueError):
            S.spitzer_exact_3d(-1, 1)

    def test_theoretical_slopes(self):
        B = cg.EuclideanBall(1.0, 3)
        assert S.theoretical_slope(BM3, B) == pytest.approx(4 * math.sqrt(2 * math.pi))
        paper = S.theoretical_slope(StableSpec(2.0, 3), B)
        assert paper == pytest.approx(8 * math.sqrt(math.pi))
        assert paper == pytest.approx(math.sqrt(2) * 4 * math.sqrt(2 * math.pi))
        # with c = 1, d V(B^2, B_3) is the circle integral of ||u||_1.5
        s = S.theoretical_slope(StableSpec(1.5, 2), cg.EuclideanBall(1.0, 2), c_alpha=1.0)
        assert s == pytest.approx(6.744993, abs=1e-5)


class TestMembership:
    def test_origin_always_inside(self):
        p = sample_path_skeleton(StableSpec(1.5, 2), 1.0, 50, SeedStream(0))
        for B in (cg.EuclideanBall(0.5, 2), cg.Polytope.cube(0.1, 2), cg.LpBall(1.0, 0.2, 2)):
            assert S.sausage_membership(np.zeros(2), p, B)

    def test_far_point(self):
        zero = PathSkeleton(BM3, 1.0, np.zeros((5, 3)))
        assert not S.sausage_membership(np.array([2.0, 0, 0]), zero, cg.EuclideanBall(1.0, 3))

    @pytest.mark.parametrize("B", [cg.EuclideanBall(0.3, 2), cg.LpBall(1.0, 0.4, 2), cg.LpBall(3.0, 0.25, 2),
                                   cg.Polytope.box([0.3, 0.5]), cg.Polytope.from_vertices([[0, 0.3], [0.4, -0.1],
                                                                                           [-0.3, -0.2]])])
    def test_matches_brute_force(self, B):
        p = sample_path_skeleton(StableSpec(1.5, 2), 1.0, 40, SeedStream(1))
        x = np.random.default_rng(2).uniform(-2.5, 2.5, size=(10_000, 2))
        fast = S.sausage_membership(x, p, B)
        slow = np.array([bool(B.contains(xi - p.points).any()) for xi in x[:2000]])
        assert np.array_equal(fast[:2000], slow)
        assert np.array_equal(fast, S.sausage_membership(x, p, B, method="brute"))
        assert 0 < fast.mean() < 1

    def test_ball_nearest_point_equals_norm_test(self):
        p = sample_path_skeleton(StableSpec(2.0, 3), 1.0, 100, SeedStream(3))
        B = cg.EuclideanBall(0.4, 3)
        x = np.random.default_rng(4).normal(size=(10_000, 3))
        dist = np.linalg.norm(x[:, None, :] - p.points[None], axis=2).min(axis=1)
        assert np.array_equal(S.sausage_membership(x, p, B), dist <= 0.4)

    def test_dimension_mismatch(self):
        p = sample_path_skeleton(StableSpec(2.0, 2), 1.0, 4, SeedStream(0))
        with pytest.raises(ValueError):
            S.sausage_membership(np.zeros(3), p, cg.EuclideanBall(1.0, 3))
        with pytest.raises(ValueError):
            S.sausage_membership(np.zeros(2), p, cg.EuclideanBall(1.0, 2), method="grid")


class TestVolume:
    def test_frozen_path_gives_body_volume(self):
        B = cg.EuclideanBall(1.0, 3)
        v = [S.sausage_volume_hit_or_miss(np.zeros((10, 3)), B, 20_000, SeedStream(i).rng()) for i in range(5)]
        # every box point inside B is a hit, so the estimate is unbiased for V(B)
        assert np.mean(v) == pytest.approx(4 * math.pi / 3, rel=0.02)

    def test_two_disjoint_balls(self):
        pts = np.array([[0.0, 0.0], [5.0, 0.0]])
        v = S.sausage_volume_hit_or_miss(pts, cg.EuclideanBall(1.0, 2), 200_000, np.random.default_rng(5))
        assert v == pytest.approx(2 * math.pi, rel=0.01)

    def test_monotone_under_rescaling(self):
        # one path rescaled to growing horizons covers growing sets
        spec = StableSpec(2.0, 2)
        out = S._sausage_task(SeedStream(6), spec, cg.EuclideanBall(0.5, 2), (0.01, 0.1, 1.0), 64, [1], 4000)
        assert out[0] <= out[1] <= out[2]

    def test_nested_levels_monotone(self):
        spec = StableSpec(1.5, 2)
        out = S._sausage_task(SeedStream(7), spec, cg.EuclideanBall(0.5, 2), (0.2,), 256, [4, 2, 1], 4000)
        assert out[0] <= out[1] <= out[2]

    def test_bm_3d_small(self):
        est = S.estimate_sausage_volume(BM3, cg.EuclideanBall(1.0, 3), 0.1, n0=64, M=2000, reps=150, seed=8)
        target = S.spitzer_exact_3d(1.0, 0.1)
        assert abs(est.mean - target) <= max(4 * est.extrapolated.std_error, 0.03 * target)
        assert all(ci.mean >= 4 * math.pi / 3 - 3 * ci.half_width for _, ci in est.raw)

    def test_polytope_body(self):
        spec = StableSpec(2.0, 2)
        est = S.estimate_sausage_volume(spec, cg.Polytope.cube(1.0, 2), 0.05, n0=16, M=2000, reps=40, seed=9)
        assert est.mean > 1.0

    def test_preconditions(self):
        B = cg.EuclideanBall(1.0, 3)
        with pytest.raises(ValueError):
            S.estimate_sausage_volume(BM3, B, 0.0, reps=4)
        with pytest.raises(ValueError):
            S.estimate_sausage_volume(BM3, B, 0.1, M=0, reps=4)
        with pytest.raises(ValueError):
            S.estimate_sausage_volume(BM3, cg.EuclideanBall(1.0, 2), 0.1, reps=4)

    def test_suggest_n0(self):
        n = S.suggest_n0(BM3, 0.2, cg.EuclideanBall(1.0, 3))
        assert (0.2 / n) ** 0.5 / math.sqrt(2) <= 0.02 < (0.2 / (n // 2)) ** 0.5 / math.sqrt(2)


class TestSlopeFit:
    def test_zero_excess(self):
        ts = [0.2, 0.1, 0.05]
        coef, _ = S.fit_small_time_slope(ts, [_ci(2.0, 0.0)] * 3, 2.0, 2.0)
        assert np.allclose(coef, 0.0)

    def test_exact_recovery(self):
        ts = np.array([0.2, 0.1, 0.05, 0.025])
        vals = 1.0 + 3.0 * ts ** (1 / 1.5) + 0.7 * ts
        coef, L = S.fit_small_time_slope(ts, [_ci(v, 1e-3) for v in vals], 1.0, 1.5)
        np.testing.assert_allclose(coef, [3.0, 0.7], rtol=1e-9)
        np.testing.assert_allclose(L @ (vals - 1.0), coef)
        one, _ = S.fit_small_time_slope(ts, [_ci(1 + 2 * t**0.5, 1e-3) for t in ts], 1.0, 2.0, terms=1)
        assert one[0] == pytest.approx(2.0)

    def test_degenerate(self):
        with pytest.raises(S.DegenerateFitError):
            S.fit_small_time_slope([0.2, 0.1, 0.05], [_ci(1.001, 0.01)] * 3, 1.0, 2.0)

    def test_request_validation(self):
        B = cg.EuclideanBall(1.0, 3)
        for grid in ([0.1, 0.2, 0.05], [0.2, 0.1], [0.2, 0.0, -0.1]):
            with pytest.raises(ValueError):
                S.SausageRequest(BM3, B, grid)
        with pytest.raises(ValueError):
            S.SausageRequest(BM3, cg.Polytope(np.eye(3)))

    def test_asymptotics_small(self):
        req = S.SausageRequest(BM3, cg.EuclideanBall(1.0, 3), (0.2, 0.1, 0.05, 0.025), n=64, reps=120, M=2000,
                               seed=10)
        res = S.small_time_asymptotics(req)
        assert len(res.estimates) == 4
        assert res.theoretical_slope == pytest.approx(10.0265, abs=1e-3)
        assert abs(res.fitted_slope - res.theoretical_slope) <= max(4 * res.slope.std_error, 0.1 * 10.03)
        for t, e, r in zip(res.t_grid, res.estimates, res.rescaled):
            assert r == pytest.approx((e.mean - res.body_volume) / math.sqrt(t))
