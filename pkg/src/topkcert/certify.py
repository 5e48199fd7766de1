"""Top-k certification algorithms over a weak/strong oracle pair.

Five certifiers share one estimator-style interface: configure the
hyperparameters on the constructor, call ``fit(weak, strong)``, and read the
fitted ``selected_`` set and ``report_``.  ``get_params`` / ``set_params``
follow the scikit-learn convention so the certifiers compose with generic
tooling (cloning, grid drivers); plain functions wrapping each certifier are
exported as well.

* ``ScreenThenCertify`` -- one-shot screening: build weak intervals, certify
  clear items, strong-query the whole ambiguous set.
* ``AdaptiveCertify`` -- iteratively strong-query the more uncertain of the
  two critical items (worst tentative-in vs best tentative-out) until the
  top-k set is certified by interval dominance.
* ``AdaptiveCertifyWeak`` -- an adaptive weak phase first: concentrate weak
  pulls on the widest ambiguous interval under time-uniform confidence
  sequences, then run the adaptive strong phase on the frozen intervals.
* ``ThresholdCertify`` -- verify items in weak-estimate order with an
  early-stopping certificate from the weak upper bounds.
* ``BruteForceCertify`` -- strong-query everything; the reference oracle.

All tie-breaks (set membership, argmin/argmax, width comparisons) resolve by
ascending item index, so runs are exactly reproducible.
"""

from __future__ import annotations

import heapq
import inspect
import math
from bisect import bisect_left, insort
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .confidence import (
    CiMethod,
    DeltaBudget,
    SubGaussian,
    anytime_subgaussian_radius,
    build_fixed_intervals,
    ci_method_from_config,
    epoch_delta,
)
from .core import IntervalState, ambiguous_set, epsilon_max, kth_largest
from .validation import check_int, check_k


@dataclass(frozen=True)
class CertificationReport:
    """Outcome of one certification run.

    ``weak_state`` is the frozen weak-phase interval state (before any strong
    reveal); harness code uses it for coverage and near-tie diagnostics.
    ``correct`` stays None until ground-truth-aware code fills it.
    """

    selected: tuple[int, ...]
    strong_calls: int
    weak_pulls: int
    ambiguous_initial: int
    ambiguous_final: int
    eps_max: float
    eps_max_ambiguous: float
    trace: tuple[int, ...]
    interval_conflicts: int
    weak_state: Optional[IntervalState]
    correct: Optional[bool] = None

    def with_correct(self, correct: bool) -> "CertificationReport":
        return replace(self, correct=correct)


def _trivial_report(n: int, k: int) -> CertificationReport:
    """k == 0 or k == n needs no oracle access at all."""
    state = IntervalState.full_range(n)
    selected = tuple(range(n)) if k == n else ()
    return CertificationReport(
        selected=selected,
        strong_calls=0,
        weak_pulls=0,
        ambiguous_initial=0 if k == 0 else int(ambiguous_set(state, k).size),
        ambiguous_final=0 if k == 0 else int(ambiguous_set(state, k).size),
        eps_max=0.5,
        eps_max_ambiguous=0.5,
        trace=(),
        interval_conflicts=0,
        weak_state=state,
    )


def _ace_loop(state: IntervalState, k: int, strong) -> tuple[np.ndarray, list[int]]:
    """Adaptive strong-query loop on an interval state (mutated in place).

    Each iteration either certifies the optimistic top-k set or collapses the
    wider of the critical pair; every strong query lands on a distinct item,
    so the loop runs at most n iterations.
    """
    lower, upper = state.lower, state.upper
    n = lower.size
    trace: list[int] = []
    if k == n:
        return np.arange(n), trace
    for _ in range(n + 1):
        u_k = np.partition(upper, n - k)[n - k]
        mask = upper > u_k
        short = k - int(np.count_nonzero(mask))
        if short > 0:
            mask[np.flatnonzero(upper == u_k)[:short]] = True
        i = int(np.argmin(np.where(mask, lower, np.inf)))
        j = int(np.argmax(np.where(mask, -np.inf, upper)))
        if lower[i] >= upper[j]:
            return np.flatnonzero(mask), trace
        x = i if (upper[i] - lower[i]) >= (upper[j] - lower[j]) else j
        value = strong.query(x)
        state.collapse_to(x, value)
        trace.append(x)
    raise AssertionError("adaptive certification did not terminate")


class BaseCertifier:
    """Estimator-style base: constructor params + fit(weak, strong)."""

    def get_params(self, deep: bool = True) -> dict:
        params = inspect.signature(type(self).__init__).parameters
        return {name: getattr(self, name) for name in params if name != "self"}

    def set_params(self, **params) -> "BaseCertifier":
        valid = self.get_params()
        for name, value in params.items():
            if name not in valid:
                raise ValueError(f"invalid parameter {name!r} for {type(self).__name__}")
            setattr(self, name, value)
        return self

    def fit(self, weak, strong, initial_state: IntervalState | None = None) -> "BaseCertifier":
        """Run certification; fitted attributes are selected_ and report_."""
        report = self._run(weak, strong, initial_state)
        self.report_ = report
        self.selected_ = report.selected
        return self

    def __repr__(self) -> str:
        args = ", ".join(f"{k}={v!r}" for k, v in self.get_params().items())
        return f"{type(self).__name__}({args})"

    # internal helpers shared by the weak-phase algorithms

    def _method(self) -> CiMethod:
        if isinstance(self.ci_method, str):
            return ci_method_from_config(self.ci_method, self.ci_sigma, self.ci_range)
        return self.ci_method

    def _n_items(self, weak, strong, initial_state) -> int:
        n = initial_state.n if initial_state is not None else weak.n_items
        if strong is not None and strong.n_items != n:
            raise ValueError("weak and strong oracles disagree on the number of items")
        return n

    def _weak_state(self, weak, initial_state, n: int, anytime: bool = False) -> IntervalState:
        if initial_state is not None:
            return initial_state.copy()
        budget = DeltaBudget.split(self.delta, n, self.delta_weak_fraction)
        return build_fixed_intervals(weak, self.n_weak, budget, self._method(), anytime=anytime)

    def _report(
        self,
        k: int,
        selected,
        weak_state: IntervalState,
        work: IntervalState,
        trace,
        weak_pulls: int,
    ) -> CertificationReport:
        amb0 = ambiguous_set(weak_state, k) if k >= 1 else np.zeros(0, dtype=np.int64)
        amb_final = ambiguous_set(work, k) if k >= 1 else np.zeros(0, dtype=np.int64)
        eps = epsilon_max(weak_state)
        return CertificationReport(
            selected=tuple(int(x) for x in np.sort(np.asarray(selected, dtype=np.int64))),
            strong_calls=len(trace),
            weak_pulls=int(weak_pulls),
            ambiguous_initial=int(amb0.size),
            ambiguous_final=int(amb_final.size),
            eps_max=eps,
            eps_max_ambiguous=epsilon_max(weak_state, amb0) if amb0.size else eps,
            trace=tuple(int(x) for x in trace),
            interval_conflicts=int(work.conflicts),
            weak_state=weak_state,
        )


class ScreenThenCertify(BaseCertifier):
    """One-shot screen-then-certify.

    Weak intervals partition items into clear IN (lower bound above the k-th
    largest upper bound), clear OUT (upper bound below the k-th largest lower
    bound) and the ambiguous rest, which is strong-queried in full.  Strong
    calls therefore equal the ambiguous-set size on every run.
    """

    def __init__(
        self,
        k: int,
        delta: float = 0.05,
        n_weak: int = 12,
        ci_method: str | CiMethod = "subgaussian",
        ci_sigma: float = 0.1,
        ci_range: float = 1.0,
        delta_weak_fraction: float = 1.0,
    ):
        self.k = k
        self.delta = delta
        self.n_weak = n_weak
        self.ci_method = ci_method
        self.ci_sigma = ci_sigma
        self.ci_range = ci_range
        self.delta_weak_fraction = delta_weak_fraction

    def _run(self, weak, strong, initial_state) -> CertificationReport:
        n = self._n_items(weak, strong, initial_state)
        k = check_k(self.k, n, allow_zero=True)
        if k == 0 or k == n:
            return _trivial_report(n, k)
        pulls_before = 0 if weak is None else weak.total_pulls
        weak_state = self._weak_state(weak, initial_state, n)
        weak_pulls = 0 if weak is None else weak.total_pulls - pulls_before

        u_k = kth_largest(weak_state.upper, k)
        clear_in = np.flatnonzero(weak_state.lower > u_k)
        amb = ambiguous_set(weak_state, k)
        work = weak_state.copy()
        revealed = np.empty(amb.size)
        for pos, x in enumerate(amb):
            revealed[pos] = strong.query(int(x))
            work.collapse_to(int(x), revealed[pos])
        need = k - clear_in.size
        assert 1 <= need <= amb.size
        chosen = amb[np.lexsort((amb, -revealed))[:need]]
        selected = np.concatenate([clear_in, chosen])
        return self._report(k, selected, weak_state, work, [int(x) for x in amb], weak_pulls)


class AdaptiveCertify(BaseCertifier):
    """Adaptive strong certification on fixed weak intervals.

    After the weak phase, repeatedly compare the worst tentative-in item
    (smallest lower bound among the k largest upper bounds) against the best
    tentative-out item (largest upper bound outside); collapse whichever of
    the two has the wider interval until dominance certifies the set.  Only
    initially ambiguous items can ever be queried, each at most once.
    """

    def __init__(
        self,
        k: int,
        delta: float = 0.05,
        n_weak: int = 12,
        ci_method: str | CiMethod = "subgaussian",
        ci_sigma: float = 0.1,
        ci_range: float = 1.0,
        delta_weak_fraction: float = 1.0,
    ):
        self.k = k
        self.delta = delta
        self.n_weak = n_weak
        self.ci_method = ci_method
        self.ci_sigma = ci_sigma
        self.ci_range = ci_range
        self.delta_weak_fraction = delta_weak_fraction

    def _run(self, weak, strong, initial_state) -> CertificationReport:
        n = self._n_items(weak, strong, initial_state)
        k = check_k(self.k, n, allow_zero=True)
        if k == 0 or k == n:
            return _trivial_report(n, k)
        pulls_before = 0 if weak is None else weak.total_pulls
        weak_state = self._weak_state(weak, initial_state, n)
        weak_pulls = 0 if weak is None else weak.total_pulls - pulls_before
        work = weak_state.copy()
        selected, trace = _ace_loop(work, k, strong)
        return self._report(k, selected, weak_state, work, trace, weak_pulls)


class AdaptiveCertifyWeak(BaseCertifier):
    """Two-phase fully adaptive certification.

    Phase I (adaptive weak allocation): warm-start every item with ``w_min``
    pulls under time-uniform confidence sequences, then spend the remaining
    weak budget one pull at a time on the ambiguous item with the widest
    interval (skipping items that reached ``w_max``).  Phase II freezes the
    intervals and runs the adaptive strong loop on them.
    """

    def __init__(
        self,
        k: int,
        delta: float = 0.05,
        weak_budget: int | None = None,
        w_min: int = 6,
        w_max: int | None = None,
        ci_method: str | CiMethod = "subgaussian",
        ci_sigma: float = 0.1,
        ci_range: float = 1.0,
        delta_weak_fraction: float = 1.0,
    ):
        self.k = k
        self.delta = delta
        self.weak_budget = weak_budget
        self.w_min = w_min
        self.w_max = w_max
        self.ci_method = ci_method
        self.ci_sigma = ci_sigma
        self.ci_range = ci_range
        self.delta_weak_fraction = delta_weak_fraction

    def _run(self, weak, strong, initial_state) -> CertificationReport:
        if initial_state is not None:
            raise ValueError("adaptive weak allocation requires live oracle access")
        n = self._n_items(weak, strong, None)
        k = check_k(self.k, n, allow_zero=True)
        if k == 0 or k == n:
            return _trivial_report(n, k)
        w_min = check_int(self.w_min, "w_min", minimum=1)
        budget = check_int(
            self.weak_budget if self.weak_budget is not None else 12 * n,
            "weak_budget",
            minimum=1,
        )
        w_max = budget if self.w_max is None else check_int(self.w_max, "w_max", minimum=w_min)
        if budget < n * w_min:
            raise ValueError(f"weak_budget={budget} cannot warm-start {n} items with w_min={w_min}")

        pulls_before = weak.total_pulls
        weak_state = self._phase1(weak, n, k, w_min, w_max, budget)
        weak_pulls = weak.total_pulls - pulls_before
        work = weak_state.copy()
        selected, trace = _ace_loop(work, k, strong)
        return self._report(k, selected, weak_state, work, trace, weak_pulls)

    def _phase1(self, weak, n, k, w_min, w_max, budget) -> IntervalState:
        method = self._method()
        delta_x = DeltaBudget.split(self.delta, n, self.delta_weak_fraction).per_item
        subgaussian = isinstance(method, SubGaussian)
        support = getattr(method, "support_range", 1.0)

        obs = weak.pull_all(w_min)
        means_arr = obs.mean(axis=1)
        m2_arr = obs.var(axis=1, ddof=1) * (w_min - 1) if w_min >= 2 else np.zeros(n)
        if subgaussian:
            r0 = anytime_subgaussian_radius(method.sigma, w_min, delta_x)
            radii = np.full(n, r0)
        else:
            log_term = math.log(3.0 / epoch_delta(delta_x, w_min))
            if w_min == 1:
                radii = np.full(n, support * math.sqrt(math.log(2.0 / epoch_delta(delta_x, 1)) / 2.0))
            else:
                variances = m2_arr / (w_min - 1)
                radii = np.sqrt(2.0 * variances * log_term / w_min) + 3.0 * support * log_term / w_min

        lower = np.clip(means_arr - radii, 0.0, 1.0).tolist()
        upper = np.clip(means_arr + radii, 0.0, 1.0).tolist()
        means = means_arr.tolist()
        m2 = m2_arr.tolist()
        counts = [w_min] * n
        budget_left = budget - n * w_min
        conflicts = 0

        # sub-Gaussian time-uniform radii depend only on the pull count, so a
        # lazily grown lookup table serves the whole loop
        if subgaussian:
            sigma = method.sigma
            radius_table = [math.nan] + [
                anytime_subgaussian_radius(sigma, c, delta_x) for c in range(1, w_min + 2)
            ]

        sorted_lower = sorted(lower)
        sorted_upper = sorted(upper)
        kth_pos = n - k
        stamps = [0] * n
        dead = [False] * n
        heap = [(lower[x] - upper[x], x, 0) for x in range(n) if counts[x] < w_max]
        heapq.heapify(heap)
        pull = weak.pull
        heappush, heappop = heapq.heappush, heapq.heappop

        while budget_left > 0:
            while heap:
                entry = heap[0]
                x = entry[1]
                if entry[2] != stamps[x] or dead[x]:
                    heappop(heap)
                    continue
                if lower[x] > sorted_upper[kth_pos] or upper[x] < sorted_lower[kth_pos]:
                    dead[x] = True
                    heappop(heap)
                    continue
                break
            else:
                break
            heappop(heap)

            value = pull(x)
            c = counts[x] + 1
            counts[x] = c
            mu = means[x]
            d = value - mu
            mu += d / c
            means[x] = mu
            m2x = m2[x] + d * (value - mu)
            m2[x] = m2x
            if subgaussian:
                if c >= len(radius_table):
                    radius_table.extend(
                        anytime_subgaussian_radius(sigma, cc, delta_x)
                        for cc in range(len(radius_table), 2 * c)
                    )
                r = radius_table[c]
            else:
                delta_w = epoch_delta(delta_x, c)
                log_term = math.log(3.0 / delta_w)
                r = math.sqrt(2.0 * (m2x / (c - 1)) * log_term / c) + 3.0 * support * log_term / c
            new_lo = mu - r
            new_hi = mu + r
            if new_lo < 0.0:
                new_lo = 0.0
            if new_hi > 1.0:
                new_hi = 1.0
            old_lo = lower[x]
            old_hi = upper[x]
            lo = old_lo if old_lo >= new_lo else new_lo
            hi = old_hi if old_hi <= new_hi else new_hi
            if lo > hi:
                lo = hi = old_hi if new_lo > old_hi else old_lo
                conflicts += 1
            if lo != old_lo:
                del sorted_lower[bisect_left(sorted_lower, old_lo)]
                insort(sorted_lower, lo)
                lower[x] = lo
            if hi != old_hi:
                del sorted_upper[bisect_left(sorted_upper, old_hi)]
                insort(sorted_upper, hi)
                upper[x] = hi
            stamps[x] += 1
            if c < w_max:
                heappush(heap, (lo - hi, x, stamps[x]))
            budget_left -= 1

        state = IntervalState.from_bounds(lower, upper, pulls=counts, means=means)
        state.conflicts = conflicts
        return state


class ThresholdCertify(BaseCertifier):
    """Verify items in weak-estimate order with an early-stopping certificate.

    Items are strong-queried by descending weak point estimate.  Once k items
    are verified, stop as soon as the k-th largest verified value is at least
    the largest weak upper bound among unverified items; those can then never
    belong to the top-k.
    """

    def __init__(
        self,
        k: int,
        delta: float = 0.05,
        n_weak: int = 12,
        ci_method: str | CiMethod = "subgaussian",
        ci_sigma: float = 0.1,
        ci_range: float = 1.0,
        delta_weak_fraction: float = 1.0,
    ):
        self.k = k
        self.delta = delta
        self.n_weak = n_weak
        self.ci_method = ci_method
        self.ci_sigma = ci_sigma
        self.ci_range = ci_range
        self.delta_weak_fraction = delta_weak_fraction

    def _run(self, weak, strong, initial_state) -> CertificationReport:
        n = self._n_items(weak, strong, initial_state)
        k = check_k(self.k, n, allow_zero=True)
        if k == 0 or k == n:
            return _trivial_report(n, k)
        pulls_before = 0 if weak is None else weak.total_pulls
        weak_state = self._weak_state(weak, initial_state, n)
        weak_pulls = 0 if weak is None else weak.total_pulls - pulls_before

        order = np.lexsort((np.arange(n), -weak_state.point_estimates()))
        # largest weak upper bound over each suffix of the query order
        suffix_max = np.empty(n + 1)
        suffix_max[n] = -np.inf
        suffix_max[:n] = np.maximum.accumulate(weak_state.upper[order][::-1])[::-1]

        work = weak_state.copy()
        trace: list[int] = []
        values: list[float] = []
        top_heap: list[float] = []
        for pos in range(n):
            x = int(order[pos])
            value = strong.query(x)
            work.collapse_to(x, value)
            trace.append(x)
            values.append(value)
            heapq.heappush(top_heap, value)
            if len(top_heap) > k:
                heapq.heappop(top_heap)
            if len(top_heap) == k and top_heap[0] >= suffix_max[pos + 1]:
                break
        verified = np.asarray(trace, dtype=np.int64)
        vals = np.asarray(values)
        selected = verified[np.lexsort((verified, -vals))[:k]]
        return self._report(k, selected, weak_state, work, trace, weak_pulls)


class BruteForceCertify(BaseCertifier):
    """Strong-query every item; the exact reference certifier."""

    def __init__(self, k: int):
        self.k = k

    def _run(self, weak, strong, initial_state) -> CertificationReport:
        n = strong.n_items
        k = check_k(self.k, n, allow_zero=True)
        values = np.array([strong.query(x) for x in range(n)])
        state = IntervalState.from_bounds(values, values, means=values)
        state.collapsed[:] = True
        selected = np.lexsort((np.arange(n), -values))[:k]
        return self._report(k, selected, state, state, list(range(n)), 0)


ALGORITHMS: dict[str, type[BaseCertifier]] = {
    "stc": ScreenThenCertify,
    "ace": AdaptiveCertify,
    "ace_w": AdaptiveCertifyWeak,
    "ta": ThresholdCertify,
    "brute": BruteForceCertify,
}


def stc(weak, strong, k, **params) -> CertificationReport:
    """One-shot screen-then-certify; see :class:`ScreenThenCertify`."""
    initial_state = params.pop("initial_state", None)
    return ScreenThenCertify(k, **params).fit(weak, strong, initial_state).report_


def ace(weak, strong, k, **params) -> CertificationReport:
    """Adaptive strong certification; see :class:`AdaptiveCertify`."""
    initial_state = params.pop("initial_state", None)
    return AdaptiveCertify(k, **params).fit(weak, strong, initial_state).report_


def ace_w(weak, strong, k, **params) -> CertificationReport:
    """Fully adaptive two-phase certification; see :class:`AdaptiveCertifyWeak`."""
    return AdaptiveCertifyWeak(k, **params).fit(weak, strong).report_


def ta_certify(weak, strong, k, **params) -> CertificationReport:
    """Sorted verification with weak-interval stopping; see :class:`ThresholdCertify`."""
    initial_state = params.pop("initial_state", None)
    return ThresholdCertify(k, **params).fit(weak, strong, initial_state).report_


def brute_force_certify(strong, k) -> CertificationReport:
    """Strong-query all items; see :class:`BruteForceCertify`."""
    return BruteForceCertify(k).fit(None, strong).report_
