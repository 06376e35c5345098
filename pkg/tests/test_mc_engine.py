import math
import pickle

import numpy as np
import pytest

from stablehull import SeedStream
from stablehull.mc_engine import (Accumulator, EstimateCI, ReplicationError, _run_chunk, accumulate,
                                  confidence_interval,
                                  discretization_fit, extrapolate, merge, run_replications, z_value)


def _acc(values):
    acc = Accumulator()
    for v in values:
        accumulate(acc, v)
    return acc


def _normal_task(stream):
    return stream.rng().normal(3.0, 2.0)


def _vector_task(stream):
    rng = stream.rng()
    x = rng.standard_normal(3)
    return [x[0], x[0] + x[1], np.exp(x[2])]


def _failing_task(stream):
    if stream.index == 7:
        raise RuntimeError("boom")
    return 1.0


def _ci(mean, se=1e-3):
    return EstimateCI(1000, mean, se * se * 1000, 2.5758 * se, 0.99)


class TestIntervals:
    def test_constant_values(self):
        ci = confidence_interval(_acc([1, 1, 1]))
        assert (ci.mean, ci.variance, ci.half_width) == (1.0, 0.0, 0.0)

    def test_two_values(self):
        ci = confidence_interval(_acc([0, 2]), 0.95)
        assert ci.mean == 1.0 and ci.variance == 2.0
        assert ci.half_width == pytest.approx(1.96 * 1.0, abs=1e-3)
        assert ci.contains(1.5) and not ci.contains(3.0)

    def test_needs_two(self):
        with pytest.raises(ValueError):
            confidence_interval(_acc([1.0]))

    def test_levels(self):
        assert z_value(0.99) == pytest.approx(2.5758293)
        assert z_value(0.9) == pytest.approx(1.6448536)
        # other levels come from the normal quantile
        assert z_value(0.8) == pytest.approx(1.2815516, rel=1e-6)
        for bad in (0.0, 1.0, 1.5):
            with pytest.raises(ValueError):
                z_value(bad)

    def test_half_width_formula(self):
        rng = np.random.default_rng(0)
        acc = Accumulator().add_batch(rng.normal(size=500))
        ci = confidence_interval(acc, 0.95)
        assert ci.half_width == pytest.approx(z_value(0.95) * math.sqrt(ci.variance / ci.count), rel=1e-14)
        assert ci.lower < ci.mean < ci.upper

    def test_overlap(self):
        a = EstimateCI(10, 0.0, 1.0, 1.0, 0.99)
        assert a.overlaps(EstimateCI(10, 1.5, 1.0, 0.6, 0.99))
        assert not a.overlaps(EstimateCI(10, 3.0, 1.0, 1.0, 0.99))

    def test_linear_combination(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(2000, 2))
        x[:, 1] += x[:, 0]
        acc = Accumulator(2).add_batch(x)
        ci = confidence_interval(acc, 0.99, [-1.0, 1.0])
        diff = x[:, 1] - x[:, 0]
        assert ci.mean == pytest.approx(diff.mean(), rel=1e-12)
        assert ci.variance == pytest.approx(diff.var(ddof=1), rel=1e-10)
        assert confidence_interval(acc, 0.99, 1).mean == pytest.approx(x[:, 1].mean())

    def test_to_dict(self):
        d = EstimateCI(4, 1.0, 0.5, 0.2, 0.95).to_dict()
        assert set(d) >= {"count", "mean", "variance", "half_width", "level"}


class TestAccumulator:
    def test_merge_equals_sequential(self):
        a = merge(_acc([1, 1]), _acc([1, 1]))
        b = _acc([1, 1, 1, 1])
        assert a.count == b.count == 4
        assert np.array_equal(a.mean, b.mean) and np.array_equal(a.m2, b.m2)

    def test_merge_associative_commutative(self):
        rng = np.random.default_rng(2)
        parts = [Accumulator(2).add_batch(rng.normal(5, 3, size=(n, 2))) for n in (3, 50, 400)]
        x, y, z = parts
        left = merge(merge(x, y), z)
        right = merge(x, merge(y, z))
        swapped = merge(z, merge(y, x))
        for other in (right, swapped):
            assert other.count == left.count
            np.testing.assert_allclose(other.mean, left.mean, rtol=1e-12)
            np.testing.assert_allclose(other.covariance, left.covariance, rtol=1e-12)

    def test_merge_with_empty(self):
        a = _acc([1.0, 2.0])
        for m in (merge(a, Accumulator()), merge(Accumulator(), a)):
            assert m.count == 2 and m.mean[0] == 1.5

    def test_batch_matches_numpy(self):
        x = np.random.default_rng(3).normal(size=(1000, 3))
        acc = Accumulator(3).add_batch(x[:400]).add_batch(x[400:])
        np.testing.assert_allclose(acc.mean, x.mean(axis=0), rtol=1e-12)
        np.testing.assert_allclose(acc.covariance, np.cov(x.T), rtol=1e-10)

    def test_variance_nonnegative_and_nan_below_two(self):
        assert np.isnan(_acc([1.0]).covariance).all()
        assert np.all(_acc([3.0, 3.0, 3.0]).variance >= 0)

    def test_stability_hundred_million(self):
        acc = Accumulator()
        n, block = 10**8, 10**6
        for start in range(0, n, block):
            k = np.arange(start, start + block, dtype=float)
            acc.add_batch(1.0 + 1e-9 * k)
        exact_var = 1e-18 * (n * n - 1) / 12 * n / (n - 1)
        assert acc.count == n
        assert acc.variance[0] >= 0
        assert acc.variance[0] == pytest.approx(exact_var, rel=1e-6)
        assert acc.mean[0] == pytest.approx(1 + 1e-9 * (n - 1) / 2, rel=1e-12)

    def test_coverage(self):
        rng = np.random.default_rng(4)
        hits = 0
        for _ in range(1000):
            acc = Accumulator().add_batch(rng.normal(0.7, 1.3, size=200))
            hits += confidence_interval(acc, 0.99).contains(0.7)
        assert hits >= 980


class TestReplications:
    def test_single(self):
        acc = run_replications(_normal_task, 1, seed=5)
        assert acc.count == 1
        assert acc.mean[0] == _normal_task(SeedStream(5, 0))

    def test_same_seed_identical(self):
        a = run_replications(_vector_task, 600, seed=9)
        b = run_replications(_vector_task, 600, seed=9)
        assert np.array_equal(a.mean, b.mean) and np.array_equal(a.m2, b.m2)
        c = run_replications(_vector_task, 600, seed=10)
        assert not np.array_equal(a.mean, c.mean)

    @pytest.mark.parametrize("workers", [2, 8])
    def test_worker_count_invariance(self, workers):
        a = run_replications(_vector_task, 1100, seed=3, workers=1)
        b = run_replications(_vector_task, 1100, seed=3, workers=workers)
        assert pickle.dumps((a.count, a.mean, a.m2)) == pickle.dumps((b.count, b.mean, b.m2))

    def test_split_merge(self):
        full = run_replications(_normal_task, 512, seed=1, chunk_size=512)
        halves = merge(_run_chunk(_normal_task, 1, 0, 256), _run_chunk(_normal_task, 1, 256, 512))
        assert full.count == halves.count == 512
        np.testing.assert_allclose(halves.mean, full.mean, rtol=1e-12)
        assert confidence_interval(full).contains(3.0)

    def test_failure_reports_index(self):
        with pytest.raises(ReplicationError) as err:
            run_replications(_failing_task, 20)
        assert err.value.index == 7

    def test_rejects_zero(self):
        with pytest.raises(ValueError):
            run_replications(_normal_task, 0)


class TestDiscretizationFit:
    def test_round_trip(self):
        ns = [64, 256, 1024]
        pairs = [(n, _ci(1 - n**-0.5)) for n in ns]
        fit = discretization_fit(pairs)
        assert fit.value == pytest.approx(1.0, abs=1e-6)
        assert fit.rate == pytest.approx(0.5, abs=1e-4)
        assert fit.bias == pytest.approx(1.0, rel=1e-3)
        assert fit.monotone

    def test_constant(self):
        fit = discretization_fit([(n, _ci(2.5)) for n in (10, 20, 40)])
        assert fit.value == pytest.approx(2.5, abs=1e-12)
        assert abs(fit.bias) < 1e-9
        assert 0.3 <= fit.rate <= 1.0

    def test_zero_standard_errors(self):
        pairs = [(n, EstimateCI(5, 3 - 2 / n, 0.0, 0.0, 0.99)) for n in (8, 16, 32)]
        fit = discretization_fit(pairs)
        assert fit.value == pytest.approx(3.0, abs=1e-6)
        assert fit.rate == pytest.approx(1.0, abs=1e-6)

    def test_non_monotone_flag(self):
        pairs = [(64, _ci(1.0)), (128, _ci(0.9)), (256, _ci(0.95))]
        fit = discretization_fit(pairs)
        assert not fit.monotone
        assert fit.value == 0.95
        assert math.isnan(fit.residual)

    def test_unordered_input(self):
        fit = discretization_fit([(1024, _ci(1 - 1024**-0.7)), (64, _ci(1 - 64**-0.7)), (256, _ci(1 - 256**-0.7))])
        assert fit.value == pytest.approx(1.0, abs=1e-6)

    def test_needs_three(self):
        with pytest.raises(ValueError):
            discretization_fit([(64, _ci(1.0)), (128, _ci(1.0))])
        with pytest.raises(ValueError):
            discretization_fit([(64, _ci(1.0)), (64, _ci(1.0)), (128, _ci(1.0))])

    def test_rate_bounds_and_residual_reported(self):
        pairs = [(n, _ci(1 - n**-2.0)) for n in (4, 8, 16)]
        fit = discretization_fit(pairs)
        assert 0.3 <= fit.rate <= 1.0
        assert fit.residual >= 0

    def test_extrapolate_coefficients(self):
        rng = np.random.default_rng(7)
        ns = [100, 200, 400]
        noise = rng.normal(size=(3000, 1)) * 0.1
        data = np.column_stack([2 - 3 / math.sqrt(n) + noise[:, 0] for n in ns])
        acc = Accumulator(3).add_batch(data)
        fit, ci, cis = extrapolate(acc, ns)
        assert ci.mean == pytest.approx(fit.value, rel=1e-10)
        assert sum(fit.coefficients) == pytest.approx(1.0, abs=1e-9)
        assert ci.contains(2.0)
        assert [c.mean for c in cis] == pytest.approx(list(acc.mean))
