"""Items, itemsets, and the operators driving condition synthesis.

An item is an atomic threshold predicate ``x_f <= v`` or ``x_f > v``; an
itemset is a conjunction of items, interpreted as the hyper-rectangle obtained
by intersecting the item intervals per feature. Itemsets keep their items in a
fixed canonical order (feature id ascending; ``<=`` before ``>``; ``<=`` by
decreasing threshold, ``>`` by increasing threshold) so that candidates
sharing a common prefix can be paired cheaply during synthesis.

Each itemset tracks the set of unstable-rectangle ids it is already known to
be disjoint from (a bitmask internally). Combining two itemsets unions these
sets, so fairness checks only ever probe rectangles not yet proven disjoint;
an itemset is fair exactly when the set covers every rectangle id.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Literal, Mapping, Sequence

import numpy as np

from .geometry import NEG_INF, POS_INF, HyperRectangle, Interval
from .model import FeatureMetadata
from .stability import UnstableSet

ItemOp = Literal["le", "gt"]


@dataclass(frozen=True, slots=True)
class Item:
    feature: int
    op: ItemOp
    threshold: float

    def interval(self) -> Interval:
        if self.op == "le":
            return Interval(NEG_INF, self.threshold)
        return Interval(self.threshold, POS_INF)

    def contains(self, value: float) -> bool:
        return value <= self.threshold if self.op == "le" else value > self.threshold

    def __str__(self) -> str:
        sym = "<=" if self.op == "le" else ">"
        return f"x{self.feature} {sym} {self.threshold:g}"


def item_sort_key(item: Item) -> tuple[int, int, float]:
    """Canonical item order: feature asc; 'le' before 'gt'; 'le' thresholds
    descending; 'gt' thresholds ascending."""
    if item.op == "le":
        return (item.feature, 0, -item.threshold)
    return (item.feature, 1, item.threshold)


def item_order(a: Item, b: Item) -> int:
    """Three-way comparison under the canonical item order."""
    ka, kb = item_sort_key(a), item_sort_key(b)
    return (ka > kb) - (ka < kb)


@dataclass(frozen=True)
class Itemset:
    """A conjunction of items with its cached region interpretation.

    ``disjoint_mask`` is a bitmask over unstable-rectangle ids already known
    to be disjoint from the region.
    """

    items: tuple[Item, ...]
    region: HyperRectangle
    disjoint_mask: int = 0

    @classmethod
    def build(cls, items: Iterable[Item], disjoint_mask: int = 0) -> Itemset:
        """Sort items canonically (dropping exact duplicates) and intersect
        their intervals per feature.

        Raises ValueError if the conjunction is empty.
        """
        ordered = tuple(sorted(set(items), key=item_sort_key))
        intervals: dict[int, Interval] = {}
        for it in ordered:
            iv = intervals.get(it.feature)
            if iv is None:
                intervals[it.feature] = it.interval()
            else:
                merged = iv.intersect(it.interval())
                if merged is None:
                    raise ValueError(f"itemset {ordered} has empty interpretation")
                intervals[it.feature] = merged
        return cls(ordered, HyperRectangle(intervals), disjoint_mask)

    @classmethod
    def top(cls) -> Itemset:
        """The empty itemset, interpreted as the whole feature space."""
        return cls((), HyperRectangle({}))

    def __len__(self) -> int:
        return len(self.items)

    @property
    def disjoint_ids(self) -> frozenset[int]:
        ids = []
        mask, i = self.disjoint_mask, 0
        while mask:
            if mask & 1:
                ids.append(i)
            mask >>= 1
            i += 1
        return frozenset(ids)

    def sort_key(self) -> tuple[tuple[int, int, float], ...]:
        return tuple(item_sort_key(it) for it in self.items)

    def prefix(self) -> tuple[Item, ...]:
        return self.items[:-1]

    def contains_point(self, x: Sequence[float]) -> bool:
        return self.region.contains_point(x)

    def to_json(self) -> dict[str, Any]:
        return {
            "items": [
                {"feature": it.feature, "op": it.op, "threshold": it.threshold}
                for it in self.items
            ]
        }

    @classmethod
    def from_json(cls, doc: Mapping[str, Any]) -> Itemset:
        return cls.build(
            Item(int(i["feature"]), i["op"], float(i["threshold"])) for i in doc["items"]
        )

    def __str__(self) -> str:
        return "{" + ", ".join(str(it) for it in self.items) + "}"


def violates_onehot_integrity(items: Iterable[Item], meta: FeatureMetadata) -> bool:
    """True iff two or more distinct one-hot values of the same group are
    asserted positive (an unsatisfiable combination under one-hot encoding)."""
    positives: dict[str, int] = {}
    for it in items:
        if it.op != "gt":
            continue
        feat = meta.features[it.feature]
        if feat.kind != "onehot":
            continue
        seen = positives.setdefault(feat.group, it.feature)
        if seen != it.feature:
            return True
    return False


def gen_itemsets(U: UnstableSet, meta: FeatureMetadata) -> list[Itemset]:
    """Singleton itemsets complementing the faces of the rectangles in U.

    For each rectangle and each feature with a bounded interval ``(l, u]``,
    emits ``{x_f <= l}`` (when l is finite) and ``{x_f > u}`` (when u is
    finite): the per-face complements of the rectangle. Duplicate singletons
    across rectangles are merged, with their disjoint-id sets unioned; every
    singleton's disjoint ids are populated against the whole of U. The result
    comes out in canonical order.
    """
    items: dict[Item, None] = {}
    for i in range(len(U)):
        for f in range(U.num_features):
            lo, hi = U.lo[i, f], U.hi[i, f]
            if lo != NEG_INF:
                items.setdefault(Item(f, "le", float(lo)))
            if hi != POS_INF:
                items.setdefault(Item(f, "gt", float(hi)))

    out = []
    for item in items:
        if violates_onehot_integrity([item], meta):
            continue
        if item.op == "le":
            disjoint = U.lo[:, item.feature] >= item.threshold
        else:
            disjoint = U.hi[:, item.feature] <= item.threshold
        out.append(Itemset.build([item], _bits_to_mask(disjoint)))
    out.sort(key=Itemset.sort_key)
    return out


def meet(i1: Itemset, i2: Itemset, meta: FeatureMetadata) -> Itemset | None:
    """Combine two k-itemsets sharing k-1 items into a (k+1)-itemset.

    The result ``I = I1 union I2`` exists iff its interpretation is non-empty,
    strictly smaller than both operands' interpretations, and respects one-hot
    integrity. Its disjoint-id set is the union of the operands' sets.
    """
    if len(i1) != len(i2):
        raise ValueError("meet requires operands of equal cardinality")
    extra2 = [it for it in i2.items if it not in i1.items]
    extra1 = [it for it in i1.items if it not in i2.items]
    if len(extra2) != 1 or len(extra1) != 1:
        raise ValueError("meet requires operands sharing all but one item")
    star, other = extra2[0], extra1[0]

    # Non-emptiness and strict shrink against i1, on the new item's feature.
    base1 = i1.region.interval(star.feature)
    shrunk1 = base1.intersect(star.interval())
    if shrunk1 is None or shrunk1 == base1:
        return None
    # Strict shrink against i2, symmetric check on the other item's feature.
    base2 = i2.region.interval(other.feature)
    shrunk2 = base2.intersect(other.interval())
    if shrunk2 is None or shrunk2 == base2:
        return None
    if violates_onehot_integrity(i1.items + (star,), meta):
        return None

    intervals = dict(i1.region.intervals)
    intervals[star.feature] = shrunk1
    region = HyperRectangle(intervals)
    if not i1.items or item_sort_key(star) > item_sort_key(i1.items[-1]):
        items = i1.items + (star,)  # prefix-sharing operands: already sorted
    else:
        items = tuple(sorted(i1.items + (star,), key=item_sort_key))
    return Itemset(items, region, i1.disjoint_mask | i2.disjoint_mask)


def meet_prefix_sharing(i1: Itemset, i2: Itemset, meta: FeatureMetadata) -> Itemset | None:
    """Meet specialized for canonically ordered operands sharing their prefix.

    Equivalent to :func:`meet` when ``i1.items[:-1] == i2.items[:-1]``,
    ``i1 < i2`` in itemset order, and both operands respect one-hot integrity
    (all guaranteed by the synthesis loop); skips the general-case item
    diffing and only checks integrity of the newly added item.
    """
    star = i2.items[-1]
    other = i1.items[-1]

    iv1 = i1.region.intervals.get(star.feature)
    lo1, hi1 = (iv1.lo, iv1.hi) if iv1 is not None else (NEG_INF, POS_INF)
    if star.op == "le":
        new_lo, new_hi = lo1, min(hi1, star.threshold)
        if new_hi == hi1 or new_lo >= new_hi:
            return None
    else:
        new_lo, new_hi = max(lo1, star.threshold), hi1
        if new_lo == lo1 or new_lo >= new_hi:
            return None

    iv2 = i2.region.intervals.get(other.feature)
    lo2, hi2 = (iv2.lo, iv2.hi) if iv2 is not None else (NEG_INF, POS_INF)
    if other.op == "le":
        if min(hi2, other.threshold) == hi2 or lo2 >= min(hi2, other.threshold):
            return None
    else:
        if max(lo2, other.threshold) == lo2 or max(lo2, other.threshold) >= hi2:
            return None

    if star.op == "gt" and meta.features[star.feature].kind == "onehot":
        group = meta.features[star.feature].group
        for it in i1.items:
            if (
                it.op == "gt"
                and it.feature != star.feature
                and meta.features[it.feature].group == group
                and meta.features[it.feature].kind == "onehot"
            ):
                return None

    intervals = dict(i1.region.intervals)
    intervals[star.feature] = Interval(new_lo, new_hi)
    return Itemset(
        i1.items + (star,),
        HyperRectangle(intervals),
        i1.disjoint_mask | i2.disjoint_mask,
    )


def subsumed_by_any(itemset: Itemset, fair: Iterable[Itemset]) -> bool:
    """True iff some already-fair itemset's region contains this region."""
    return any(itemset.region.subset_of(f.region) for f in fair)


def check_fair(
    itemset: Itemset, U: UnstableSet, use_ids_cache: bool = True
) -> tuple[bool, Itemset]:
    """Decide whether the itemset's region is disjoint from every rectangle.

    Only rectangles not already recorded as disjoint are probed (unless the
    cache is disabled, in which case all of U is rescanned). Returns the
    verdict and an updated copy of the itemset carrying the enlarged
    disjoint-id set; the input is never mutated.
    """
    m = len(U)
    full = (1 << m) - 1
    mask = itemset.disjoint_mask if use_ids_cache else 0
    if mask == full:
        return True, replace(itemset, disjoint_mask=full)

    remaining = _mask_to_missing(mask, m)
    disjoint = np.zeros(len(remaining), dtype=bool)
    for f, iv in itemset.region.intervals.items():
        disjoint |= (U.lo[remaining, f] >= iv.hi) | (U.hi[remaining, f] <= iv.lo)
    newly = np.zeros(m, dtype=bool)
    newly[remaining[disjoint]] = True
    new_mask = mask | _bits_to_mask(newly)
    return new_mask == full, replace(itemset, disjoint_mask=new_mask)


def _bits_to_mask(bits: np.ndarray) -> int:
    """Pack a boolean id vector into an integer bitmask."""
    if not bits.any():
        return 0
    packed = np.packbits(bits.astype(np.uint8), bitorder="little")
    return int.from_bytes(packed.tobytes(), "little")


def _dense_bounds(
    itemsets: Sequence[Itemset], num_features: int
) -> tuple[np.ndarray, np.ndarray]:
    lo = np.full((len(itemsets), num_features), NEG_INF)
    hi = np.full((len(itemsets), num_features), POS_INF)
    for i, its in enumerate(itemsets):
        for f, iv in its.region.intervals.items():
            lo[i, f] = iv.lo
            hi[i, f] = iv.hi
    return lo, hi


def batch_check_fair(
    itemsets: Sequence[Itemset], U: UnstableSet, use_ids_cache: bool = True
) -> list[tuple[bool, Itemset]]:
    """Vectorized :func:`check_fair` over many itemsets at once.

    Returns (verdict, updated itemset) pairs in input order, identical to
    calling ``check_fair`` element-wise. With the cache enabled, itemsets
    whose recorded disjoint ids already cover all of U are declared fair
    without touching the rectangle arrays.
    """
    m = len(U)
    full = (1 << m) - 1
    out: list[tuple[bool, Itemset] | None] = [None] * len(itemsets)
    todo: list[int] = []
    for i, its in enumerate(itemsets):
        if use_ids_cache and its.disjoint_mask == full:
            out[i] = (True, replace(its, disjoint_mask=full))
        else:
            todo.append(i)
    if todo:
        subset = [itemsets[i] for i in todo]
        lo, hi = _dense_bounds(subset, U.num_features)
        n = len(subset)
        rows = np.zeros((n, m), dtype=bool)
        chunk = max(1, 4_000_000 // max(1, m * U.num_features))
        for start in range(0, n, chunk):
            sl = slice(start, start + chunk)
            # disjoint on some feature: one box starts at or after the other ends
            rows[sl] = (
                (lo[sl, None, :] >= U.hi[None, :, :])
                | (U.lo[None, :, :] >= hi[sl, None, :])
            ).any(axis=2)
        packed = np.packbits(rows, axis=1, bitorder="little")
        for row_bytes, i in zip(packed, todo):
            its = itemsets[i]
            found = int.from_bytes(row_bytes.tobytes(), "little")
            new_mask = (its.disjoint_mask | found) if use_ids_cache else found
            out[i] = (new_mask == full, replace(its, disjoint_mask=new_mask))
    return out  # type: ignore[return-value]


def _mask_to_missing(mask: int, m: int) -> np.ndarray:
    """Ids in 0..m-1 whose bit is not set."""
    if mask == 0 or m == 0:
        return np.arange(m)
    raw = np.frombuffer(mask.to_bytes((m + 7) // 8, "little"), dtype=np.uint8)
    bits = np.unpackbits(raw, bitorder="little", count=m)
    return np.nonzero(bits == 0)[0]


class FairIndex:
    """Fast containment queries against a growing set of fair itemsets.

    Fair regions are grouped by the exact set of features they constrain: a
    candidate can only be contained in a region constraining a subset of the
    candidate's features, so each query touches a handful of groups and does
    one vectorized bound comparison per group.
    """

    def __init__(self) -> None:
        self._groups: dict[tuple[int, ...], _BoundsGroup] = {}
        self._has_top = False

    def __len__(self) -> int:
        return self._has_top + sum(len(g) for g in self._groups.values())

    def add(self, itemset: Itemset) -> None:
        feats = tuple(sorted(itemset.region.intervals))
        if not feats:
            self._has_top = True
            return
        group = self._groups.get(feats)
        if group is None:
            group = self._groups[feats] = _BoundsGroup(feats)
        group.add(itemset.region)

    def freeze(self) -> None:
        """Pack all groups so later queries are read-only (thread-safe)."""
        for group in self._groups.values():
            group.pack()

    def subsumes(self, itemset: Itemset) -> bool:
        if self._has_top:
            return True
        feats = sorted(itemset.region.intervals)
        if len(feats) <= 14:
            combos: Iterable[tuple[int, ...]] = itertools.chain.from_iterable(
                itertools.combinations(feats, r) for r in range(1, len(feats) + 1)
            )
            candidates = (self._groups.get(c) for c in combos)
            groups = [g for g in candidates if g is not None]
        else:
            fset = set(feats)
            groups = [g for key, g in self._groups.items() if set(key) <= fset]
        for group in groups:
            if group.any_contains(itemset.region):
                return True
        return False

    def batch_subsumes(self, itemsets: Sequence[Itemset], num_features: int) -> np.ndarray:
        """Vectorized :meth:`subsumes` over many itemsets at once."""
        if self._has_top:
            return np.ones(len(itemsets), dtype=bool)
        if not itemsets or not self._groups:
            return np.zeros(len(itemsets), dtype=bool)
        return self._batch_subsumes_dense(*_dense_bounds(itemsets, num_features))

    def batch_subsumes_bounds(
        self, regions: Sequence[Mapping[int, tuple[float, float]]], num_features: int
    ) -> np.ndarray:
        """Like :meth:`batch_subsumes`, for raw feature -> (lo, hi) maps."""
        if self._has_top:
            return np.ones(len(regions), dtype=bool)
        if not regions or not self._groups:
            return np.zeros(len(regions), dtype=bool)
        lo = np.full((len(regions), num_features), NEG_INF)
        hi = np.full((len(regions), num_features), POS_INF)
        for i, region in enumerate(regions):
            for f, (flo, fhi) in region.items():
                lo[i, f] = flo
                hi[i, f] = fhi
        return self._batch_subsumes_dense(lo, hi)

    def _batch_subsumes_dense(self, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        subsumed = np.zeros(len(lo), dtype=bool)
        for feats, group in self._groups.items():
            group.pack()
            glo, ghi = group._packed
            cols = np.array(feats)
            todo = np.nonzero(~subsumed)[0]
            if len(todo) == 0:
                break
            sub_lo = lo[np.ix_(todo, cols)]
            sub_hi = hi[np.ix_(todo, cols)]
            chunk = max(1, 4_000_000 // max(1, len(glo) * len(cols)))
            for start in range(0, len(todo), chunk):
                sl = slice(start, start + chunk)
                contained = (
                    (glo[None, :, :] <= sub_lo[sl, None, :])
                    & (ghi[None, :, :] >= sub_hi[sl, None, :])
                ).all(axis=2).any(axis=1)
                subsumed[todo[sl][contained]] = True
        return subsumed


class _BoundsGroup:
    def __init__(self, feats: tuple[int, ...]):
        self.feats = feats
        self._lo: list[list[float]] = []
        self._hi: list[list[float]] = []
        self._packed: tuple[np.ndarray, np.ndarray] | None = None

    def __len__(self) -> int:
        return len(self._lo)

    def add(self, region: HyperRectangle) -> None:
        self._lo.append([region.intervals[f].lo for f in self.feats])
        self._hi.append([region.intervals[f].hi for f in self.feats])
        self._packed = None

    def pack(self) -> None:
        if self._packed is None:
            self._packed = (np.array(self._lo), np.array(self._hi))

    def any_contains(self, region: HyperRectangle) -> bool:
        if self._packed is None:
            self.pack()
        lo, hi = self._packed
        cand_lo = np.array([region.interval(f).lo for f in self.feats])
        cand_hi = np.array([region.interval(f).hi for f in self.feats])
        return bool(((lo <= cand_lo) & (hi >= cand_hi)).all(axis=1).any())
