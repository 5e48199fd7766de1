"""Tests for the five certifiers: exactness, cost identities, budget discipline."""

import numpy as np
import pytest

from topkcert.certify import (
    ALGORITHMS,
    AdaptiveCertify,
    AdaptiveCertifyWeak,
    BruteForceCertify,
    ScreenThenCertify,
    ThresholdCertify,
    ace,
    ace_w,
    brute_force_certify,
    stc,
    ta_certify,
)
from topkcert.confidence import (
    DeltaBudget,
    SubGaussian,
    anytime_subgaussian_radius,
    build_fixed_intervals,
)
from topkcert.core import (
    Instance,
    IntervalState,
    ambiguous_set,
    coverage_event_holds,
    epsilon_max,
    true_top_k,
)
from topkcert.instances import GapInstanceSpec, PackingSpec, generate_gap_instance, generate_packing_instance
from topkcert.oracles import StrongOracle, WeakOracle, snapshot_and_reset


def _truth(instance):
    return tuple(int(x) for x in true_top_k(instance))


def _random_instance(seed, n=40, k=8):
    rng = np.random.default_rng(seed)
    return Instance(values=rng.random(n), k=k)


def _final_state_from(report, instance):
    """Reconstruct the final intervals from the frozen state plus the trace."""
    state = report.weak_state.copy()
    for x in report.trace:
        state.collapse_to(x, float(instance.values[x]))
    return state


class TestZeroNoise:
    """Noise-free weak oracle with tiny radii: the boundary is immediately clear."""

    def setup_method(self):
        rng = np.random.default_rng(3)
        values = np.round(np.linspace(0.05, 0.95, 25), 3)
        self.inst = Instance(values=values[rng.permutation(25)], k=6)
        self.kwargs = dict(n_weak=4, ci_method="subgaussian", ci_sigma=1e-4)

    def _oracles(self):
        return WeakOracle(self.inst, noise="exact", seed=0), StrongOracle(self.inst)

    def test_stc_queries_exactly_the_threshold_item(self):
        weak, strong = self._oracles()
        report = stc(weak, strong, k=6, **self.kwargs)
        assert report.ambiguous_initial == 1
        assert report.strong_calls == 1
        assert report.selected == _truth(self.inst)

    def test_ace_needs_zero_strong_calls(self):
        weak, strong = self._oracles()
        report = ace(weak, strong, k=6, **self.kwargs)
        assert report.strong_calls == 0
        assert report.selected == _truth(self.inst)

    def test_ta_stops_after_k_calls(self):
        weak, strong = self._oracles()
        report = ta_certify(weak, strong, k=6, **self.kwargs)
        assert report.strong_calls == 6
        assert report.selected == _truth(self.inst)


class TestPackingInstances:
    @pytest.mark.parametrize("m", [50, 100, 200])
    def test_one_shot_and_adaptive_query_all_packed_items(self, m):
        inst, state = generate_packing_instance(PackingSpec(n=400, k=10, m=m), seed=m)
        truth = _truth(inst)
        rep_stc = stc(None, StrongOracle(inst), k=10, initial_state=state)
        rep_ace = ace(None, StrongOracle(inst), k=10, initial_state=state)
        assert rep_stc.strong_calls == m
        assert rep_ace.strong_calls == m
        assert rep_stc.selected == rep_ace.selected == truth
        assert sorted(rep_stc.trace) == sorted(rep_ace.trace) == list(range(m))

    def test_packed_equals_ambiguous_set(self):
        inst, state = generate_packing_instance(PackingSpec(n=300, k=10, m=80))
        assert list(ambiguous_set(state, 10)) == list(range(80))


class TestScreenThenCertify:
    def test_strong_calls_equal_ambiguous_size_on_every_seed(self):
        for seed in range(30):
            inst = generate_gap_instance(GapInstanceSpec(n=250, k=25, seed=seed))
            weak, strong = WeakOracle(inst, sigma=0.1, seed=seed), StrongOracle(inst)
            report = stc(weak, strong, k=25)
            assert report.strong_calls == report.ambiguous_initial
            assert report.strong_calls == ambiguous_set(report.weak_state, 25).size
            assert sorted(report.trace) == list(ambiguous_set(report.weak_state, 25))

    def test_correct_whenever_covered(self):
        for seed in range(30):
            inst = _random_instance(seed, n=60, k=12)
            weak, strong = WeakOracle(inst, sigma=0.05, seed=seed), StrongOracle(inst)
            report = stc(weak, strong, k=12)
            if coverage_event_holds(inst, report.weak_state):
                assert report.selected == _truth(inst)


class TestAdaptiveCertify:
    def test_queries_stay_inside_initial_ambiguous_set(self):
        for seed in range(25):
            inst = generate_gap_instance(GapInstanceSpec(n=200, k=20, seed=seed))
            weak, strong = WeakOracle(inst, sigma=0.1, seed=seed), StrongOracle(inst)
            report = ace(weak, strong, k=20)
            amb = set(int(x) for x in ambiguous_set(report.weak_state, 20))
            assert set(report.trace) <= amb
            assert len(set(report.trace)) == len(report.trace)

    def test_paired_dominance_over_one_shot(self):
        for seed in range(25):
            inst = generate_gap_instance(GapInstanceSpec(n=200, k=20, seed=seed))
            weak = WeakOracle(inst, sigma=0.1, seed=seed)
            strong = StrongOracle(inst)
            rep_stc = stc(weak, strong, k=20)
            snapshot_and_reset(weak, strong)
            rep_ace = ace(weak, strong, k=20)
            assert rep_ace.strong_calls <= rep_stc.strong_calls
            # identical weak phases is what makes the comparison paired
            np.testing.assert_array_equal(rep_ace.weak_state.lower, rep_stc.weak_state.lower)

    def test_termination_certificate(self):
        for seed in range(20):
            inst = _random_instance(seed, n=80, k=15)
            weak, strong = WeakOracle(inst, sigma=0.08, seed=seed), StrongOracle(inst)
            report = ace(weak, strong, k=15)
            final = _final_state_from(report, inst)
            inside = np.asarray(report.selected)
            outside = np.setdiff1d(np.arange(inst.n), inside)
            assert final.lower[inside].min() >= final.upper[outside].max()

    def test_separated_intervals_certify_for_free(self):
        state = IntervalState.from_bounds(
            np.array([0.8, 0.6, 0.1]), np.array([0.9, 0.7, 0.2])
        )
        inst = Instance(values=np.array([0.85, 0.65, 0.15]), k=2)
        report = ace(None, StrongOracle(inst), k=2, initial_state=state)
        assert report.strong_calls == 0
        assert report.selected == (0, 1)


def _reference_adaptive_weak_phase(instance, seed, k, delta, w_min, w_max, budget, sigma):
    """From-scratch reimplementation of the adaptive weak phase.

    Recomputes the ambiguous set and the boundary order statistics from
    definitions at every step; only pulls currently ambiguous items below the
    per-item cap, widest interval first with index tie-break.
    """
    weak = WeakOracle(instance, sigma=sigma, seed=seed)
    n = instance.n
    delta_x = delta / n
    obs = weak.pull_all(w_min)
    means = obs.mean(axis=1).tolist()
    m2 = (obs.var(axis=1, ddof=1) * (w_min - 1)).tolist()
    counts = [w_min] * n
    r0 = anytime_subgaussian_radius(sigma, w_min, delta_x)
    lower = [max(0.0, means[x] - r0) for x in range(n)]
    upper = [min(1.0, means[x] + r0) for x in range(n)]
    sequence = []
    budget_left = budget - n * w_min
    while budget_left > 0:
        u_k = sorted(upper, reverse=True)[k - 1]
        l_k = sorted(lower, reverse=True)[k - 1]
        ambiguous = [x for x in range(n) if lower[x] <= u_k and upper[x] >= l_k]
        eligible = [x for x in ambiguous if counts[x] < w_max]
        if not eligible:
            break
        x = min(eligible, key=lambda y: (lower[y] - upper[y], y))
        value = weak.pull(x)
        counts[x] += 1
        c = counts[x]
        mu = means[x]
        d = value - mu
        mu += d / c
        means[x] = mu
        m2[x] += d * (value - mu)
        r = anytime_subgaussian_radius(sigma, c, delta_x)
        new_lo, new_hi = max(0.0, mu - r), min(1.0, mu + r)
        lo, hi = max(lower[x], new_lo), min(upper[x], new_hi)
        if lo > hi:
            lo = hi = upper[x] if new_lo > upper[x] else lower[x]
        lower[x], upper[x] = lo, hi
        sequence.append(x)
        budget_left -= 1
    return sequence, lower, upper, counts


class _RecordingWeakOracle(WeakOracle):
    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.single_pull_log = []

    def pull(self, x):
        self.single_pull_log.append(x)
        return super().pull(x)


class TestAdaptiveCertifyWeak:
    def test_phase_one_matches_reference_implementation(self):
        for seed in (0, 1, 2):
            inst = generate_gap_instance(GapInstanceSpec(n=60, k=10, seed=seed))
            budget = 60 * 12
            ref_seq, ref_lo, ref_hi, ref_counts = _reference_adaptive_weak_phase(
                inst, seed, k=10, delta=0.05, w_min=6, w_max=budget, budget=budget, sigma=0.1
            )
            weak = _RecordingWeakOracle(inst, sigma=0.1, seed=seed)
            report = ace_w(weak, StrongOracle(inst), k=10, weak_budget=budget, w_min=6)
            assert weak.single_pull_log == ref_seq
            np.testing.assert_array_equal(report.weak_state.lower, np.asarray(ref_lo))
            np.testing.assert_array_equal(report.weak_state.upper, np.asarray(ref_hi))
            np.testing.assert_array_equal(report.weak_state.pulls, np.asarray(ref_counts))

    def test_budget_and_per_item_cap(self):
        inst = generate_gap_instance(GapInstanceSpec(n=120, k=12, seed=4))
        weak = WeakOracle(inst, sigma=0.1, seed=4)
        budget = 120 * 12
        report = ace_w(weak, StrongOracle(inst), k=12, weak_budget=budget, w_min=6, w_max=9)
        assert weak.total_pulls <= budget
        assert report.weak_pulls == weak.total_pulls
        assert weak.pulls_per_item.max() <= 9
        assert weak.pulls_per_item.min() >= 6

    def test_exhausts_budget_when_uncapped(self):
        inst = generate_gap_instance(GapInstanceSpec(n=100, k=10, seed=5))
        weak = WeakOracle(inst, sigma=0.1, seed=5)
        budget = 100 * 10
        ace_w(weak, StrongOracle(inst), k=10, weak_budget=budget, w_min=6)
        # the ambiguous set never empties, so an uncapped phase spends everything
        assert weak.total_pulls == budget

    def test_degenerate_budget_equals_adaptive_on_warm_start(self):
        inst = generate_gap_instance(GapInstanceSpec(n=150, k=15, seed=6))
        weak = WeakOracle(inst, sigma=0.1, seed=6)
        rep_w = ace_w(weak, StrongOracle(inst), k=15, weak_budget=150 * 6, w_min=6)
        weak.reset()
        state = build_fixed_intervals(
            weak, 6, DeltaBudget.split(0.05, 150), SubGaussian(0.1), anytime=True
        )
        rep_a = ace(None, StrongOracle(inst), k=15, initial_state=state)
        assert rep_w.trace == rep_a.trace
        assert rep_w.selected == rep_a.selected

    def test_reports_ambiguous_radius_at_freeze(self):
        inst = generate_gap_instance(GapInstanceSpec(n=150, k=15, seed=7))
        weak = WeakOracle(inst, sigma=0.1, seed=7)
        report = ace_w(weak, StrongOracle(inst), k=15, weak_budget=150 * 12, w_min=6)
        amb = ambiguous_set(report.weak_state, 15)
        assert report.eps_max_ambiguous == epsilon_max(report.weak_state, amb)
        assert report.eps_max == epsilon_max(report.weak_state)
        assert report.eps_max_ambiguous <= report.eps_max

    def test_budget_too_small_rejected(self):
        inst = _random_instance(0, n=30, k=5)
        weak = WeakOracle(inst, sigma=0.1, seed=0)
        with pytest.raises(ValueError):
            ace_w(weak, StrongOracle(inst), k=5, weak_budget=100, w_min=6)

    def test_prescribed_intervals_rejected(self):
        inst, state = generate_packing_instance(PackingSpec(n=50, k=5, m=20))
        certifier = AdaptiveCertifyWeak(k=5)
        with pytest.raises(ValueError):
            certifier.fit(WeakOracle(inst, seed=0), StrongOracle(inst), initial_state=state)


class TestThresholdCertify:
    def test_identical_intervals_verify_everything(self):
        rng = np.random.default_rng(8)
        values = 0.4 + 0.2 * rng.random(30)
        inst = Instance(values=values, k=5)
        state = IntervalState.from_bounds(np.full(30, 0.3), np.full(30, 0.7))
        report = ta_certify(None, StrongOracle(inst), k=5, initial_state=state)
        assert report.strong_calls == 30
        assert report.selected == _truth(inst)

    def test_stops_early_with_informative_intervals(self):
        for seed in range(20):
            inst = generate_gap_instance(GapInstanceSpec(n=200, k=20, seed=seed))
            weak, strong = WeakOracle(inst, sigma=0.1, seed=seed), StrongOracle(inst)
            report = ta_certify(weak, strong, k=20)
            assert 20 <= report.strong_calls <= 200
            if coverage_event_holds(inst, report.weak_state):
                assert report.selected == _truth(inst)

    def test_stopping_rule_certificate(self):
        # at the stop, the k-th largest verified value dominates every
        # unverified weak upper bound
        inst = generate_gap_instance(GapInstanceSpec(n=150, k=15, seed=9))
        weak, strong = WeakOracle(inst, sigma=0.1, seed=9), StrongOracle(inst)
        report = ta_certify(weak, strong, k=15)
        if report.strong_calls < inst.n:
            verified = np.asarray(report.trace)
            unverified = np.setdiff1d(np.arange(inst.n), verified)
            kth_verified = sorted(inst.values[verified], reverse=True)[14]
            assert kth_verified >= report.weak_state.upper[unverified].max()


class TestBruteForce:
    def test_matches_true_top_k(self):
        for seed in range(20):
            inst = _random_instance(seed, n=25, k=7)
            report = brute_force_certify(StrongOracle(inst), k=7)
            assert report.selected == _truth(inst)
            assert report.strong_calls == 25
            assert report.trace == tuple(range(25))

    def test_always_queries_everything(self):
        inst = _random_instance(5, n=12, k=12)
        assert brute_force_certify(StrongOracle(inst), k=12).strong_calls == 12


class TestEdgeCases:
    @pytest.mark.parametrize("name", ["stc", "ace", "ace_w", "ta"])
    def test_k_zero_and_k_n(self, name):
        inst = _random_instance(11, n=15, k=5)
        weak, strong = WeakOracle(inst, sigma=0.1, seed=0), StrongOracle(inst)
        low = ALGORITHMS[name](k=0).fit(weak, strong).report_
        assert low.selected == () and low.strong_calls == 0
        high = ALGORITHMS[name](k=15).fit(weak, strong).report_
        assert high.selected == tuple(range(15)) and high.strong_calls == 0
        assert strong.calls == 0

    def test_k_larger_than_n_rejected(self):
        inst = _random_instance(12, n=10, k=3)
        with pytest.raises(ValueError):
            stc(WeakOracle(inst, seed=0), StrongOracle(inst), k=11)


class TestBoundedNoisePath:
    """End-to-end runs with clamped observations and empirical-Bernstein radii."""

    def setup_method(self):
        rng = np.random.default_rng(21)
        # mid-range values keep clamped Gaussian noise effectively unbiased
        self.inst = Instance(values=0.3 + 0.4 * rng.random(150), k=15)
        self.kwargs = dict(n_weak=600, ci_method="empirical_bernstein", ci_range=1.0)

    def _oracles(self, seed=1):
        return (
            WeakOracle(self.inst, sigma=0.05, seed=seed, clamp=True),
            StrongOracle(self.inst),
        )

    def test_one_shot_screens_with_bernstein_intervals(self):
        weak, strong = self._oracles()
        report = stc(weak, strong, k=15, **self.kwargs)
        assert 0 < report.strong_calls < self.inst.n
        if coverage_event_holds(self.inst, report.weak_state):
            assert report.selected == _truth(self.inst)

    def test_adaptive_dominates_one_shot_under_bernstein(self):
        weak, strong = self._oracles()
        rep_stc = stc(weak, strong, k=15, **self.kwargs)
        snapshot_and_reset(weak, strong)
        rep_ace = ace(weak, strong, k=15, **self.kwargs)
        assert rep_ace.strong_calls <= rep_stc.strong_calls

    def test_adaptive_weak_phase_with_bernstein_sequence(self):
        weak, strong = self._oracles()
        report = ace_w(
            weak,
            strong,
            k=15,
            weak_budget=150 * 800,
            w_min=400,
            ci_method="empirical_bernstein",
            ci_range=1.0,
        )
        assert weak.total_pulls <= 150 * 800
        if coverage_event_holds(self.inst, report.weak_state):
            assert report.selected == _truth(self.inst)

    def test_anytime_method_as_fixed_construction(self):
        weak, strong = self._oracles()
        report = stc(weak, strong, k=15, n_weak=600, ci_method="anytime_empirical_bernstein")
        fixed = stc(*self._oracles(), k=15, **self.kwargs)
        assert report.strong_calls >= fixed.strong_calls
        if coverage_event_holds(self.inst, report.weak_state):
            assert report.selected == _truth(self.inst)


class TestEstimatorInterface:
    def test_get_and_set_params_roundtrip(self):
        certifier = AdaptiveCertify(k=10, delta=0.01, n_weak=20)
        params = certifier.get_params()
        assert params["k"] == 10 and params["delta"] == 0.01 and params["n_weak"] == 20
        certifier.set_params(delta=0.1)
        assert certifier.delta == 0.1
        clone = AdaptiveCertify(**certifier.get_params())
        assert clone.get_params() == certifier.get_params()

    def test_unknown_param_rejected(self):
        with pytest.raises(ValueError):
            ScreenThenCertify(k=3).set_params(bogus=1)

    def test_fit_sets_attributes(self):
        inst = _random_instance(13, n=30, k=6)
        certifier = ThresholdCertify(k=6).fit(
            WeakOracle(inst, sigma=0.1, seed=1), StrongOracle(inst)
        )
        assert certifier.selected_ == certifier.report_.selected
        assert len(certifier.selected_) == 6

    def test_repr_shows_params(self):
        assert "k=4" in repr(BruteForceCertify(k=4))

    def test_registry_names(self):
        assert set(ALGORITHMS) == {"stc", "ace", "ace_w", "ta", "brute"}
