"""Tests for interval constructions, budgets, and the weak-phase builder."""

import math

import numpy as np
import pytest

from topkcert.confidence import (
    DeltaBudget,
    EmpiricalBernstein,
    StreamStats,
    SubGaussian,
    anytime_radius,
    anytime_subgaussian_radius,
    bonferroni_split,
    build_fixed_intervals,
    ci_method_from_config,
    epoch_delta,
    fixed_radius,
    intersect_update,
)
from topkcert.core import Instance, coverage_event_holds
from topkcert.oracles import WeakOracle
from topkcert._hashing import gaussian_matrix, item_keys


class TestBonferroni:
    @pytest.mark.parametrize(
        "delta_weak,n,expected",
        [(0.05, 100, 5e-4), (0.05, 1, 0.05), (0.1, 10**4, 1e-5)],
    )
    def test_uniform_split(self, delta_weak, n, expected):
        assert bonferroni_split(delta_weak, n) == pytest.approx(expected)

    def test_budget_split(self):
        budget = DeltaBudget.split(0.05, 200)
        assert budget.delta_weak == 0.05
        assert budget.delta_strong == 0.0
        assert budget.per_item == pytest.approx(0.05 / 200)

    def test_budget_fraction(self):
        budget = DeltaBudget.split(0.05, 10, weak_fraction=0.5)
        assert budget.delta_weak == pytest.approx(0.025)

    def test_invalid(self):
        with pytest.raises(ValueError):
            bonferroni_split(1.5, 10)
        with pytest.raises(ValueError):
            DeltaBudget.split(0.05, 0)


class TestStreamStats:
    def test_matches_batch_recomputation(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            values = rng.random(int(rng.integers(2, 200)))
            stats = StreamStats.from_values(values)
            assert stats.count == values.size
            assert stats.mean == pytest.approx(values.mean(), rel=1e-12)
            assert stats.variance == pytest.approx(values.var(ddof=1), rel=1e-12, abs=1e-15)

    def test_variance_needs_two(self):
        stats = StreamStats.from_values([0.5])
        with pytest.raises(ValueError):
            _ = stats.variance


class TestFixedRadius:
    def test_subgaussian_closed_form(self):
        stats = StreamStats(count=100)
        r = fixed_radius(SubGaussian(sigma=0.1), stats, 0.01)
        assert r == pytest.approx(0.1 * math.sqrt(2 * math.log(200.0) / 100), rel=1e-12)
        assert r == pytest.approx(0.03255, abs=2e-5)

    def test_subgaussian_bonferroni_defaults(self):
        # n = 10^4 items, delta 0.05, 12 pulls, sigma 0.1
        stats = StreamStats(count=12)
        r = fixed_radius(SubGaussian(sigma=0.1), stats, 0.05 / 10**4)
        assert r == pytest.approx(0.1 * math.sqrt(2 * math.log(2 / 5e-6) / 12), rel=1e-12)
        assert r == pytest.approx(0.1466, abs=2e-4)

    def test_empirical_bernstein_zero_variance(self):
        stats = StreamStats.from_values([0.5] * 12)
        delta_x = 5e-6
        r = fixed_radius(EmpiricalBernstein(support_range=1.0), stats, delta_x)
        assert r == pytest.approx(3 * math.log(3 / delta_x) / 12, rel=1e-12)

    def test_empirical_bernstein_general(self):
        rng = np.random.default_rng(1)
        values = rng.random(30)
        stats = StreamStats.from_values(values)
        delta_x = 1e-3
        log_term = math.log(3 / delta_x)
        expected = math.sqrt(2 * values.var(ddof=1) * log_term / 30) + 3 * log_term / 30
        assert fixed_radius(EmpiricalBernstein(), stats, delta_x) == pytest.approx(expected)

    def test_monotone_in_count_and_delta(self):
        radii_n = [
            fixed_radius(SubGaussian(0.1), StreamStats(count=n), 1e-3) for n in (2, 5, 20, 100)
        ]
        assert radii_n == sorted(radii_n, reverse=True)
        radii_d = [
            fixed_radius(SubGaussian(0.1), StreamStats(count=10), d) for d in (1e-6, 1e-4, 1e-2)
        ]
        assert radii_d == sorted(radii_d, reverse=True)

    def test_count_preconditions(self):
        with pytest.raises(ValueError):
            fixed_radius(EmpiricalBernstein(), StreamStats(count=1), 0.01)
        with pytest.raises(ValueError):
            fixed_radius(SubGaussian(0.1), StreamStats(count=0), 0.01)

    def test_method_from_config(self):
        assert ci_method_from_config("subgaussian", sigma=0.2) == SubGaussian(0.2)
        assert ci_method_from_config("empirical_bernstein") == EmpiricalBernstein(1.0)
        with pytest.raises(ValueError):
            ci_method_from_config("bogus")


class TestAnytimeRadius:
    def test_first_pull_falls_back_to_range_bound(self):
        stats = StreamStats.from_values([0.7])
        delta_x = 0.01
        expected = math.sqrt(math.log(2 / epoch_delta(delta_x, 1)) / 2)
        assert anytime_radius(stats, delta_x, 1.0) == pytest.approx(expected)

    def test_epoch_budgets_sum_to_delta(self):
        delta_x = 0.02
        total = sum(epoch_delta(delta_x, 2**e) for e in range(200))
        assert total <= delta_x + 1e-12
        assert total == pytest.approx(delta_x, rel=1e-2)

    def test_shrinks_within_epoch_at_fixed_variance(self):
        delta_x = 1e-3
        # counts 17..31 share one epoch; keep the variance identical
        radii = []
        for count in range(17, 32):
            stats = StreamStats(count=count, mean=0.5, m2=0.04 * (count - 1))
            radii.append(anytime_radius(stats, delta_x, 1.0))
        assert all(a > b for a, b in zip(radii, radii[1:]))

    def test_wider_than_fixed_radius(self):
        stats = StreamStats(count=40, mean=0.5, m2=0.02 * 39)
        assert anytime_radius(stats, 1e-3, 1.0) > fixed_radius(EmpiricalBernstein(), stats, 1e-3)

    def test_subgaussian_variant_closed_form(self):
        delta_x = 1e-3
        r = anytime_subgaussian_radius(0.1, 24, delta_x)
        assert r == pytest.approx(0.1 * math.sqrt(2 * math.log(2 / epoch_delta(delta_x, 24)) / 24))

    def test_general_count_closed_form(self):
        # independent evaluation of the sequence radius on a (count, variance) grid
        delta_x = 5e-4
        for count, variance in [(2, 0.0), (7, 0.03), (33, 0.25), (512, 0.01)]:
            stats = StreamStats(count=count, mean=0.5, m2=variance * (count - 1))
            log_term = math.log(3 / (delta_x * 6 / (math.pi**2 * (math.floor(math.log2(count)) + 1) ** 2)))
            expected = math.sqrt(2 * variance * log_term / count) + 3 * log_term / count
            assert anytime_radius(stats, delta_x, 1.0) == pytest.approx(expected, rel=1e-12)

    def test_time_uniform_coverage_bernoulli(self):
        # modest-scale Monte-Carlo check; the acceptance suite runs the full one
        rng = np.random.default_rng(7)
        streams, horizon, delta_x = 2000, 64, 0.05
        obs = (rng.random((streams, horizon)) < 0.5).astype(float)
        counts = np.arange(1, horizon + 1, dtype=float)
        means = np.cumsum(obs, axis=1) / counts
        sq = np.cumsum(obs * obs, axis=1)
        violated = np.zeros(streams, dtype=bool)
        for w in range(1, horizon + 1):
            if w == 1:
                r = math.sqrt(math.log(2 / epoch_delta(delta_x, 1)) / 2)
            else:
                var = np.maximum(sq[:, w - 1] - w * means[:, w - 1] ** 2, 0.0) / (w - 1)
                log_term = math.log(3 / epoch_delta(delta_x, w))
                r = np.sqrt(2 * var * log_term / w) + 3 * log_term / w
            violated |= np.abs(means[:, w - 1] - 0.5) > r
        assert violated.mean() <= delta_x


class TestBuildFixedIntervals:
    def test_exact_noise_covers_truth(self):
        values = np.array([0.2, 0.5, 0.9])
        inst = Instance(values=values, k=1)
        weak = WeakOracle(inst, noise="exact", seed=0)
        state = build_fixed_intervals(weak, 4, DeltaBudget.split(0.05, 3), SubGaussian(0.1))
        assert coverage_event_holds(inst, state)
        assert np.allclose(state.means, values)
        assert weak.total_pulls == 12

    def test_subgaussian_radii_are_data_independent(self):
        rng = np.random.default_rng(2)
        inst = Instance(values=rng.random(50), k=5)
        weak = WeakOracle(inst, sigma=0.1, seed=1)
        state = build_fixed_intervals(weak, 12, DeltaBudget.split(0.05, 50), SubGaussian(0.1))
        expected = 0.1 * math.sqrt(2 * math.log(2 / (0.05 / 50)) / 12)
        unclipped = (state.lower > 0) & (state.upper < 1)
        assert np.allclose(state.radius()[unclipped], expected)
        assert state.radius().max() == pytest.approx(expected)

    def test_matches_hand_rolled_reference(self):
        # independent reimplementation: raw streams -> means -> radius -> clip
        values = np.array([0.1, 0.5, 0.9])
        inst = Instance(values=values, k=1)
        seed, n_pulls, delta = 11, 6, 0.05
        weak = WeakOracle(inst, sigma=0.2, seed=seed)
        state = build_fixed_intervals(weak, n_pulls, DeltaBudget.split(delta, 3), SubGaussian(0.2))
        raw = values[:, None] + gaussian_matrix(item_keys(seed, 3), 0, n_pulls, 0.2)
        means = raw.mean(axis=1)
        radius = 0.2 * math.sqrt(2 * math.log(2 / (delta / 3)) / n_pulls)
        np.testing.assert_allclose(state.lower, np.clip(means - radius, 0, 1))
        np.testing.assert_allclose(state.upper, np.clip(means + radius, 0, 1))

    def test_weak_budget_enforced(self):
        inst = Instance(values=np.array([0.5, 0.6]), k=1)
        weak = WeakOracle(inst, seed=0, max_pulls=5)
        from topkcert.oracles import BudgetExceededError

        with pytest.raises(BudgetExceededError):
            build_fixed_intervals(weak, 3, DeltaBudget.split(0.05, 2), SubGaussian(0.1))

    def test_intersect_update_function(self):
        from topkcert.core import IntervalState

        state = IntervalState.from_bounds(np.array([0.2]), np.array([0.8]))
        assert not intersect_update(state, 0, 0.4, 0.9)
        assert state.interval(0) == (0.4, 0.8)
