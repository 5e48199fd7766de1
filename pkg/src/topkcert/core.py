"""Ground-truth instances, order statistics, and interval-state vocabulary.

An :class:`Instance` is the hidden truth (item values and the target size k);
an :class:`IntervalState` is everything an algorithm is allowed to see: one
confidence interval per item, pull counts, and collapse flags.  The module
also provides the near-tie mass and ambiguous-set computations that drive
every strong-call bound, plus ground-truth diagnostics (coverage checks) that
only test and harness code may call.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .validation import check_int, check_item, check_k, check_non_negative, check_values


class Interval(NamedTuple):
    """A closed interval [lower, upper] with lower <= upper."""

    lower: float
    upper: float

    @property
    def radius(self) -> float:
        return 0.5 * (self.upper - self.lower)


@dataclass(frozen=True)
class Instance:
    """Hidden ground truth: item values in [0, 1] and the top-k target size.

    Ties everywhere are broken by ascending item index, so the top-k set,
    the threshold (k-th largest value) and the gap are all deterministic.
    """

    values: np.ndarray
    k: int

    def __post_init__(self):
        values = check_values(self.values)
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "k", check_k(self.k, values.size))

    @property
    def n(self) -> int:
        return int(self.values.size)

    @property
    def threshold(self) -> float:
        """The k-th largest value."""
        return kth_largest(self.values, self.k)

    @property
    def gap(self) -> float:
        """v_(k) - v_(k+1); +inf when k == n."""
        if self.k == self.n:
            return math.inf
        return self.threshold - kth_largest(self.values, self.k + 1)


@dataclass
class IntervalState:
    """Per-item confidence intervals with pull counts and collapse flags.

    Intervals only shrink over an algorithm's lifetime: updates go through
    :meth:`intersect_update`, so lower bounds never decrease and upper bounds
    never increase.  ``collapsed[x]`` records that item x was revealed exactly
    (lower == upper).  ``conflicts`` counts empty intersections, which can
    only occur when some interval failed to cover its true value.
    """

    lower: np.ndarray
    upper: np.ndarray
    pulls: np.ndarray
    collapsed: np.ndarray
    means: Optional[np.ndarray] = None
    conflicts: int = 0

    @classmethod
    def from_bounds(cls, lower, upper, pulls=None, means=None) -> "IntervalState":
        lower = np.asarray(lower, dtype=np.float64).copy()
        upper = np.asarray(upper, dtype=np.float64).copy()
        if lower.shape != upper.shape or lower.ndim != 1:
            raise ValueError("lower and upper must be 1-D arrays of equal length")
        if np.any(lower > upper):
            bad = int(np.argmax(lower > upper))
            raise ValueError(f"empty interval at item {bad}: [{lower[bad]}, {upper[bad]}]")
        n = lower.size
        if pulls is None:
            pulls = np.zeros(n, dtype=np.int64)
        else:
            pulls = np.asarray(pulls, dtype=np.int64).copy()
        if means is not None:
            means = np.asarray(means, dtype=np.float64).copy()
        return cls(
            lower=lower,
            upper=upper,
            pulls=pulls,
            collapsed=(lower == upper).copy(),
            means=means,
        )

    @classmethod
    def full_range(cls, n: int) -> "IntervalState":
        """The no-information state: every interval is [0, 1]."""
        n = check_int(n, "n", minimum=1)
        return cls.from_bounds(np.zeros(n), np.ones(n))

    @property
    def n(self) -> int:
        return int(self.lower.size)

    def radius(self) -> np.ndarray:
        return 0.5 * (self.upper - self.lower)

    def interval(self, item: int) -> Interval:
        item = check_item(item, self.n)
        return Interval(float(self.lower[item]), float(self.upper[item]))

    def point_estimates(self) -> np.ndarray:
        """Sample means when available, interval midpoints otherwise."""
        if self.means is not None:
            return self.means
        return 0.5 * (self.lower + self.upper)

    def copy(self) -> "IntervalState":
        return IntervalState(
            lower=self.lower.copy(),
            upper=self.upper.copy(),
            pulls=self.pulls.copy(),
            collapsed=self.collapsed.copy(),
            means=None if self.means is None else self.means.copy(),
            conflicts=self.conflicts,
        )

    def intersect_update(self, item: int, lower: float, upper: float) -> bool:
        """Intersect item's interval with [lower, upper]; returns True on conflict.

        An empty intersection is clamped to the boundary point nearest the new
        interval and flagged rather than raised, so runs where coverage failed
        still terminate (and get counted as incorrect).
        """
        if lower > upper:
            raise ValueError(f"empty update interval [{lower}, {upper}]")
        old_lo = self.lower[item]
        old_hi = self.upper[item]
        new_lo = old_lo if old_lo >= lower else lower
        new_hi = old_hi if old_hi <= upper else upper
        conflict = new_lo > new_hi
        if conflict:
            point = old_hi if lower > old_hi else old_lo
            new_lo = new_hi = point
            self.conflicts += 1
        self.lower[item] = new_lo
        self.upper[item] = new_hi
        if new_lo == new_hi:
            self.collapsed[item] = True
        assert self.lower[item] >= old_lo and self.upper[item] <= old_hi
        return bool(conflict)

    def collapse_to(self, item: int, value: float) -> bool:
        """Record an exact reveal of item's value; returns True on conflict."""
        conflict = self.intersect_update(item, value, value)
        self.collapsed[item] = True
        return conflict


def kth_largest(values: Sequence[float] | np.ndarray, k: int) -> float:
    """The k-th largest element, counting multiplicity."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("values must be non-empty")
    k = check_k(k, arr.size)
    return float(np.partition(arr, arr.size - k)[arr.size - k])


def true_top_k(instance: Instance) -> np.ndarray:
    """Indices of the k largest values, ascending-index tie-break; sorted."""
    order = np.lexsort((np.arange(instance.n), -instance.values))
    return np.sort(order[: instance.k])


def near_tie_mass(instance: Instance, eta: float) -> int:
    """m(eta): how many items sit within eta of the threshold (inclusive)."""
    eta = check_non_negative(eta, "eta")
    return int(np.count_nonzero(np.abs(instance.values - instance.threshold) <= eta))


def ambiguous_set(state: IntervalState, k: int) -> np.ndarray:
    """Items whose intervals overlap the k-th boundary band; sorted indices.

    A = {x : L(x) <= U_(k) and U(x) >= L_(k)} where L_(k) and U_(k) are the
    k-th largest lower and upper bounds.  A is never empty: any item attaining
    U_(k) belongs to it.
    """
    k = check_k(k, state.n)
    u_k = kth_largest(state.upper, k)
    l_k = kth_largest(state.lower, k)
    return np.flatnonzero((state.lower <= u_k) & (state.upper >= l_k))


def epsilon_max(state: IntervalState, restrict_to=None) -> float:
    """Largest confidence radius, optionally over a subset of items."""
    radius = state.radius()
    if restrict_to is None:
        return float(radius.max())
    idx = np.asarray(restrict_to, dtype=np.int64)
    if idx.size == 0:
        raise ValueError("restrict_to must be non-empty")
    return float(radius[idx].max())


def coverage_event_holds(instance: Instance, state: IntervalState) -> bool:
    """Ground-truth diagnostic: does every interval contain its true value?

    Consumes the hidden values; only tests and the harness may call it.
    """
    v = instance.values
    return bool(np.all((state.lower <= v) & (v <= state.upper)))


def check_lemma1(instance: Instance, state: IntervalState) -> bool:
    """Ground-truth diagnostic: |ambiguous set| <= m(4 * eps_max).

    Guaranteed whenever the coverage event holds; the harness asserts it on
    every covered run.
    """
    a_size = ambiguous_set(state, instance.k).size
    return a_size <= near_tie_mass(instance, 4.0 * epsilon_max(state))
