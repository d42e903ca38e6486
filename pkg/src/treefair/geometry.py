"""Interval and hyper-rectangle algebra.

All intervals are left-open right-closed ``(lo, hi]`` over the extended reals,
matching the split semantics of tree predicates (``x <= v`` goes left,
``x > v`` goes right): thresholds land exactly on interval boundaries, so the
regions of a tree's leaves partition the feature space with no overlap and no
gap. Hyper-rectangles store intervals sparsely; a feature absent from the map
is unconstrained, i.e. ``(-inf, +inf)``.
"""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any

NEG_INF = float("-inf")
POS_INF = float("inf")


@dataclass(frozen=True, slots=True)
class Interval:
    """Left-open right-closed interval ``(lo, hi]``; never empty."""

    lo: float = NEG_INF
    hi: float = POS_INF

    def __post_init__(self) -> None:
        if not self.lo < self.hi:
            raise ValueError(f"empty interval ({self.lo}, {self.hi}]")

    @property
    def is_full(self) -> bool:
        return self.lo == NEG_INF and self.hi == POS_INF

    def contains(self, x: float) -> bool:
        return self.lo < x <= self.hi

    def intersect(self, other: Interval) -> Interval | None:
        """``(max lo, min hi]`` when non-empty, else None."""
        lo = max(self.lo, other.lo)
        hi = min(self.hi, other.hi)
        return Interval(lo, hi) if lo < hi else None

    def includes(self, other: Interval) -> bool:
        """True iff ``other`` is contained in this interval."""
        return self.lo <= other.lo and other.hi <= self.hi

    def midpoint(self) -> float:
        """A representative point inside the interval (used by tests)."""
        if self.is_full:
            return 0.0
        if self.lo == NEG_INF:
            return self.hi
        if self.hi == POS_INF:
            return self.lo + 1.0
        return (self.lo + self.hi) / 2.0

    def to_json(self) -> dict[str, Any]:
        return {"lo": _bound_to_json(self.lo), "hi": _bound_to_json(self.hi)}

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> Interval:
        return cls(_bound_from_json(obj["lo"]), _bound_from_json(obj["hi"]))


FULL_INTERVAL = Interval()


def interval_intersect(a: Interval, b: Interval) -> Interval | None:
    return a.intersect(b)


def _bound_to_json(v: float) -> float | str:
    if v == NEG_INF:
        return "-inf"
    if v == POS_INF:
        return "+inf"
    return v


def _bound_from_json(v: Any) -> float:
    if v == "-inf":
        return NEG_INF
    if v in ("+inf", "inf"):
        return POS_INF
    if isinstance(v, (int, float)) and math.isfinite(v):
        return float(v)
    raise ValueError(f"invalid interval bound: {v!r}")


@dataclass(frozen=True)
class HyperRectangle:
    """Axis-aligned box: sparse map feature-id -> Interval (absent = full).

    Never empty by construction, since every stored interval is non-empty.
    """

    intervals: Mapping[int, Interval] = field(default_factory=dict)
    id: int | None = None

    def __post_init__(self) -> None:
        # Canonical sparse form: explicitly-full intervals are dropped.
        if any(iv.is_full for iv in self.intervals.values()):
            object.__setattr__(
                self,
                "intervals",
                {f: iv for f, iv in self.intervals.items() if not iv.is_full},
            )

    def interval(self, feature: int) -> Interval:
        return self.intervals.get(feature, FULL_INTERVAL)

    def intersects(self, other: HyperRectangle) -> bool:
        """True iff the boxes share at least one point."""
        for f, iv in self.intervals.items():
            o = other.intervals.get(f)
            if o is not None and iv.intersect(o) is None:
                return False
        return True

    def intersect(self, other: HyperRectangle) -> HyperRectangle | None:
        """The intersection box, or None when disjoint."""
        merged = dict(self.intervals)
        for f, o in other.intervals.items():
            mine = merged.get(f)
            if mine is None:
                merged[f] = o
            else:
                both = mine.intersect(o)
                if both is None:
                    return None
                merged[f] = both
        return HyperRectangle(merged)

    def subset_of(self, other: HyperRectangle) -> bool:
        """True iff every point of this box lies in ``other``."""
        for f, o in other.intervals.items():
            if not o.includes(self.interval(f)):
                return False
        return True

    def contains_point(self, x: Sequence[float]) -> bool:
        return all(iv.contains(x[f]) for f, iv in self.intervals.items())

    def same_region(self, other: HyperRectangle) -> bool:
        """Exact interval equality on every feature (ignores ids)."""
        return dict(self.intervals) == dict(other.intervals)

    def key(self) -> tuple[tuple[int, float, float], ...]:
        """Canonical hashable key of the region (sorted by feature)."""
        return tuple((f, iv.lo, iv.hi) for f, iv in sorted(self.intervals.items()))

    def to_json(self) -> dict[str, Any]:
        doc: dict[str, Any] = {}
        if self.id is not None:
            doc["id"] = self.id
        doc["intervals"] = {str(f): iv.to_json() for f, iv in sorted(self.intervals.items())}
        return doc

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> HyperRectangle:
        intervals = {int(f): Interval.from_json(iv) for f, iv in obj.get("intervals", {}).items()}
        return cls(intervals, obj.get("id"))


FULL_SPACE = HyperRectangle()


def hr_intersects(a: HyperRectangle, b: HyperRectangle) -> bool:
    return a.intersects(b)


def hr_subset(a: HyperRectangle, b: HyperRectangle) -> bool:
    return a.subset_of(b)


def hr_contains_point(a: HyperRectangle, x: Sequence[float]) -> bool:
    return a.contains_point(x)
