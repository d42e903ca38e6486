"""Iterative synthesis of fairness conditions over an unstable set.

Candidates are itemsets; an itemset whose region is disjoint from every
unstable rectangle is a proven sufficient condition for fairness. Iteration 1
screens the singleton itemsets generated from the rectangle faces; iteration k
combines surviving candidates that share a (k-1)-item prefix through the meet
operator, so the itemsets it emits have cardinality k. The loop stops when no
candidates remain (the returned set is then a complete cover of the space
outside the rectangles) or when the iteration bound is hit, which preserves
soundness but not completeness.
"""

from __future__ import annotations

import math
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import InputError
from .geometry import NEG_INF, POS_INF, HyperRectangle, Interval
from .itemsets import FairIndex, Item, Itemset, check_fair, gen_itemsets
from .model import Ensemble, FeatureMetadata
from .stability import DEFAULT_MAX_CLASSES, UnstableSet, analyze

DEFAULT_MAX_CANDIDATES = 10_000_000

_PAIR_CHUNK = 4096


@dataclass
class FormulaSet:
    """Fairness conditions discovered by a synthesis run.

    Members appear in discovery order; ``member_iterations[i]`` records the
    iteration that produced ``itemsets[i]``, so the state after any earlier
    stopping point can be reconstructed as a prefix. ``warning`` is set when a
    resource limit truncated the run (the members present are still sound).
    """

    itemsets: list[Itemset]
    member_iterations: list[int]
    per_iteration: list[tuple[int, int]]
    converged: bool
    warning: str | None = None

    @property
    def iterations(self) -> int:
        return self.per_iteration[-1][0] if self.per_iteration else 0

    @property
    def per_iteration_counts(self) -> list[int]:
        return [count for _, count in self.per_iteration]

    def up_to(self, k: int) -> list[Itemset]:
        """Members discovered in iterations <= k."""
        return [its for its, it in zip(self.itemsets, self.member_iterations) if it <= k]


def synthesize(
    ensemble: Ensemble,
    sensitive: Iterable[int],
    max_iters: float = math.inf,
    *,
    max_classes: int = DEFAULT_MAX_CLASSES,
    max_candidates: int = DEFAULT_MAX_CANDIDATES,
    threads: int = 1,
    use_ids_cache: bool = True,
) -> FormulaSet:
    """Run the stability analysis, then synthesize fairness conditions."""
    U = analyze(ensemble, sensitive, max_classes=max_classes)
    return synthesize_from_unstable(
        U,
        ensemble.metadata,
        max_iters,
        max_candidates=max_candidates,
        threads=threads,
        use_ids_cache=use_ids_cache,
    )


def synthesize_from_unstable(
    U: UnstableSet,
    meta: FeatureMetadata,
    max_iters: float = math.inf,
    *,
    max_candidates: int = DEFAULT_MAX_CANDIDATES,
    threads: int = 1,
    use_ids_cache: bool = True,
) -> FormulaSet:
    """Synthesis loop over an explicit unstable set (also the test hook).

    Candidates are held in prefix groups (a shared item prefix plus one tail
    item per candidate), which keeps the per-candidate footprint at a few
    machine words even when the Apriori frontier grows into the millions.
    Disjoint-id sets distribute over conjunction (an itemset's region is
    disjoint from a rectangle exactly when one of its items' half-spaces is),
    so with the ids cache enabled a candidate's fairness check is a single
    bitmask comparison assembled from the per-item masks; disabling the cache
    rescans the rectangles instead.
    """
    if max_iters != math.inf and (int(max_iters) != max_iters or max_iters < 1):
        raise InputError("max_iters must be a positive integer or infinity")
    if len(U) == 0:
        # Nothing is discriminable: the trivially true condition covers X.
        return FormulaSet([Itemset.top()], [0], [], True)

    fair_index = FairIndex()
    formulas: list[Itemset] = []
    member_iterations: list[int] = []
    per_iteration: list[tuple[int, int]] = []

    def merge_fair(pending: list[Itemset], iteration: int) -> int:
        """End-of-iteration sweep: drop members subsumed by an earlier one."""
        kept = 0
        for its in pending:
            if fair_index.subsumes(its):
                continue
            fair_index.add(its)
            formulas.append(its)
            member_iterations.append(iteration)
            kept += 1
        return kept

    full_mask = (1 << len(U)) - 1
    item_masks: dict[Item, int] = {}
    candidates: list[Itemset] = []
    pending: list[Itemset] = []
    for its in gen_itemsets(U, meta):
        item_masks[its.items[0]] = its.disjoint_mask
        fair, its = check_fair(its, U, use_ids_cache)
        (pending if fair else candidates).append(its)
    per_iteration.append((1, merge_fair(pending, 1)))

    groups: list[_Group] = (
        [_Group((), [s.items[0] for s in candidates])] if candidates else []
    )
    n_candidates = len(candidates)

    warning: str | None = None
    iteration = 1
    while groups and iteration < max_iters:
        iteration += 1
        fair_index.freeze()
        pending = []
        next_groups: list[_Group] = []
        n_candidates = 0
        overflow = False

        units = _work_units(groups)
        runner = _UnitRunner(U, meta, item_masks, full_mask, fair_index, use_ids_cache)
        if threads > 1:
            results = _parallel_map(runner, units, threads)
        else:
            results = map(runner, units)
        for fair_sets, child_groups in results:
            pending.extend(fair_sets)
            for child in child_groups:
                if not child.tails:
                    continue
                next_groups.append(child)
                n_candidates += len(child.tails)
            if n_candidates > max_candidates:
                overflow = True
                break

        per_iteration.append((iteration, merge_fair(pending, iteration)))
        if overflow:
            warning = (
                f"candidate limit {max_candidates} exceeded at iteration {iteration}; "
                "returned conditions are sound but incomplete"
            )
            break
        groups = next_groups

    converged = (not groups or n_candidates == 0) and warning is None
    return FormulaSet(formulas, member_iterations, per_iteration, converged, warning)


@dataclass
class _Group:
    """Candidates sharing a common item prefix; each tail item denotes the
    candidate ``prefix + (tail,)``. Tails are kept in canonical item order."""

    prefix: tuple[Item, ...]
    tails: list[Item]


def _work_units(groups: list[_Group]) -> Iterator[tuple[_Group, int, int]]:
    """Split groups into (group, tail-start, tail-stop) units of bounded pair
    count so huge groups parallelize; unit order preserves the global
    lexicographic pair order."""
    for group in groups:
        t = len(group.tails)
        if t < 2:
            continue
        if t * (t - 1) // 2 <= _PAIR_CHUNK * 4:
            yield group, 0, t
            continue
        start = 0
        budget = _PAIR_CHUNK * 4
        pairs = 0
        for i in range(t - 1):
            pairs += t - 1 - i
            if pairs >= budget:
                yield group, start, i + 1
                start = i + 1
                pairs = 0
        if start < t - 1:
            yield group, start, t - 1


class _UnitRunner:
    """Processes one work unit: pair the unit's tails against later tails,
    apply the meet conditions, the subsumption skip, and the fairness check.

    Pure with respect to shared state (the fair index is frozen), so units
    can run on any number of threads with results merged in submission order.
    """

    def __init__(
        self,
        U: UnstableSet,
        meta: FeatureMetadata,
        item_masks: dict[Item, int],
        full_mask: int,
        fair_index: FairIndex,
        use_ids_cache: bool,
    ):
        self.U = U
        self.meta = meta
        self.item_masks = item_masks
        self.full_mask = full_mask
        self.fair_index = fair_index
        self.use_ids_cache = use_ids_cache

    def __call__(
        self, unit: tuple[_Group, int, int]
    ) -> tuple[list[Itemset], list[_Group]]:
        group, start, stop = unit
        meta = self.meta
        prefix = group.prefix
        tails = group.tails
        region = _prefix_region(prefix)
        prefix_mask = 0
        for it in prefix:
            prefix_mask |= self.item_masks[it]

        # Per-tail precomputation against the prefix region: the interval on
        # the tail's feature, whether adding the tail strictly shrinks it,
        # and the tail's positively asserted one-hot group (if any).
        tail_iv: list[tuple[float, float]] = []
        tail_strict: list[bool] = []
        tail_group: list[str | None] = []
        prefix_positive = {
            meta.features[it.feature].group
            for it in prefix
            if it.op == "gt" and meta.features[it.feature].kind == "onehot"
        }
        for t in tails:
            lo, hi = region.get(t.feature, (NEG_INF, POS_INF))
            if t.op == "le":
                new = (lo, min(hi, t.threshold))
            else:
                new = (max(lo, t.threshold), hi)
            tail_iv.append(new)
            tail_strict.append(new != (lo, hi))
            feat = meta.features[t.feature]
            tail_group.append(
                feat.group if (t.op == "gt" and feat.kind == "onehot") else None
            )

        survivors: list[tuple[int, int]] = []  # (i, j) tail index pairs
        for i in range(start, min(stop, len(tails) - 1)):
            a = tails[i]
            fa = a.feature
            a_iv = tail_iv[i]
            for j in range(i + 1, len(tails)):
                b = tails[j]
                if b.feature != fa:
                    if not (tail_strict[i] and tail_strict[j]):
                        continue
                    if tail_group[j] is not None and (
                        tail_group[j] in prefix_positive or tail_group[j] == tail_group[i]
                    ):
                        continue
                else:
                    # Same feature: intersect directly and require a strict
                    # shrink against both parents.
                    alo, ahi = a_iv
                    blo, bhi = tail_iv[j]
                    clo, chi = max(alo, blo), min(ahi, bhi)
                    if clo >= chi or (clo, chi) == (alo, ahi) or (clo, chi) == (blo, bhi):
                        continue
                survivors.append((i, j))

        if not survivors:
            return [], []

        # Subsumption skip against the frozen fair set, batched.
        keep = self._not_subsumed(region, tails, tail_iv, survivors)

        fair_out: list[Itemset] = []
        children: dict[int, _Group] = {}
        if self.use_ids_cache:
            fair_flags = self._fair_by_masks(prefix_mask, tails, survivors, keep)
        else:
            fair_flags = self._fair_by_scan(region, tails, tail_iv, survivors, keep)
        for (i, j), kept, fair in zip(survivors, keep, fair_flags):
            if not kept:
                continue
            if fair:
                fair_out.append(
                    self._materialize(prefix, region, tails, tail_iv, i, j, prefix_mask)
                )
            else:
                child = children.get(i)
                if child is None:
                    child = children[i] = _Group(prefix + (tails[i],), [])
                child.tails.append(tails[j])
        ordered_children = [children[i] for i in sorted(children)]
        return fair_out, ordered_children

    def _not_subsumed(self, region, tails, tail_iv, survivors) -> list[bool]:
        if len(self.fair_index) == 0:
            return [True] * len(survivors)
        candidates = []
        for i, j in survivors:
            intervals = dict(region)
            intervals[tails[i].feature] = tail_iv[i]
            if tails[j].feature == tails[i].feature:
                alo, ahi = tail_iv[i]
                blo, bhi = tail_iv[j]
                intervals[tails[j].feature] = (max(alo, blo), min(ahi, bhi))
            else:
                intervals[tails[j].feature] = tail_iv[j]
            candidates.append(intervals)
        subsumed = self.fair_index.batch_subsumes_bounds(candidates, self.U.num_features)
        return list(~subsumed)

    def _fair_by_masks(self, prefix_mask, tails, survivors, keep) -> list[bool]:
        masks = self.item_masks
        full = self.full_mask
        return [
            kept and (prefix_mask | masks[tails[i]] | masks[tails[j]]) == full
            for (i, j), kept in zip(survivors, keep)
        ]

    def _fair_by_scan(self, region, tails, tail_iv, survivors, keep) -> list[bool]:
        U = self.U
        out = []
        for (i, j), kept in zip(survivors, keep):
            if not kept:
                out.append(False)
                continue
            intervals = dict(region)
            intervals[tails[i].feature] = tail_iv[i]
            if tails[j].feature == tails[i].feature:
                alo, ahi = tail_iv[i]
                blo, bhi = tail_iv[j]
                intervals[tails[j].feature] = (max(alo, blo), min(ahi, bhi))
            else:
                intervals[tails[j].feature] = tail_iv[j]
            disjoint = np.zeros(len(U), dtype=bool)
            for f, (lo, hi) in intervals.items():
                disjoint |= (U.lo[:, f] >= hi) | (U.hi[:, f] <= lo)
            out.append(bool(disjoint.all()))
        return out

    def _materialize(
        self, prefix, region, tails, tail_iv, i, j, prefix_mask
    ) -> Itemset:
        intervals = {f: Interval(lo, hi) for f, (lo, hi) in region.items()}
        a, b = tails[i], tails[j]
        intervals[a.feature] = Interval(*tail_iv[i])
        if b.feature == a.feature:
            alo, ahi = tail_iv[i]
            blo, bhi = tail_iv[j]
            intervals[b.feature] = Interval(max(alo, blo), min(ahi, bhi))
        else:
            intervals[b.feature] = Interval(*tail_iv[j])
        mask = prefix_mask | self.item_masks[a] | self.item_masks[b]
        return Itemset(prefix + (a, b), HyperRectangle(intervals), mask)


def _prefix_region(prefix: tuple[Item, ...]) -> dict[int, tuple[float, float]]:
    region: dict[int, tuple[float, float]] = {}
    for it in prefix:
        lo, hi = region.get(it.feature, (NEG_INF, POS_INF))
        if it.op == "le":
            region[it.feature] = (lo, min(hi, it.threshold))
        else:
            region[it.feature] = (max(lo, it.threshold), hi)
    return region


def _parallel_map(runner, units, threads: int):
    """Run work units on a thread pool, yielding results in submission order
    so the outcome is identical to the sequential path."""
    with ThreadPoolExecutor(max_workers=threads) as pool:
        inflight: deque = deque()
        for unit in units:
            inflight.append(pool.submit(runner, unit))
            if len(inflight) >= threads * 2:
                yield inflight.popleft().result()
        while inflight:
            yield inflight.popleft().result()


# ---------------------------------------------------------------------------
# Rendering


@dataclass(frozen=True)
class RangeConjunct:
    feature: int
    name: str
    lo: float
    hi: float

    @property
    def text(self) -> str:
        if self.lo == NEG_INF:
            return f"{self.name} ≤ {self.hi:g}"
        if self.hi == POS_INF:
            return f"{self.name} > {self.lo:g}"
        return f"{self.lo:g} < {self.name} ≤ {self.hi:g}"


@dataclass(frozen=True)
class BinaryConjunct:
    feature: int
    name: str
    value: bool

    @property
    def text(self) -> str:
        return f"{self.name} = {'true' if self.value else 'false'}"


@dataclass(frozen=True)
class CategoryConjunct:
    group: str
    values: tuple[str, ...]
    positive: bool = True

    @property
    def text(self) -> str:
        if not self.positive:
            return f"{self.group} ≠ \"{self.values[0]}\""
        parts = [f"{self.group} = \"{v}\"" for v in self.values]
        if len(parts) == 1:
            return parts[0]
        return "(" + " ∨ ".join(parts) + ")"


Conjunct = RangeConjunct | BinaryConjunct | CategoryConjunct


@dataclass
class RenderedFormula:
    """A human-readable condition; its interpretation is the union of the
    regions of the source itemsets."""

    conjuncts: list[Conjunct]
    sources: list[Itemset]

    @property
    def text(self) -> str:
        if not self.conjuncts:
            return "TRUE"
        return " ∧ ".join(c.text for c in self.conjuncts)


def _category_value(meta: FeatureMetadata, fid: int) -> str:
    f = meta.features[fid]
    prefix = f"{f.group}_"
    return f.name[len(prefix):] if f.name.startswith(prefix) else f.name


def _conjuncts_of(itemset: Itemset, meta: FeatureMetadata) -> list[Conjunct]:
    out: list[Conjunct] = []
    for fid, iv in sorted(itemset.region.intervals.items()):
        feat = meta.features[fid]
        if feat.kind in ("binary", "onehot"):
            has0, has1 = iv.contains(0.0), iv.contains(1.0)
            if has0 == has1:  # degenerate; fall back to the raw range
                out.append(RangeConjunct(fid, feat.name, iv.lo, iv.hi))
            elif feat.kind == "binary":
                out.append(BinaryConjunct(fid, feat.name, has1))
            else:
                out.append(
                    CategoryConjunct(feat.group, (_category_value(meta, fid),), has1)
                )
        else:
            out.append(RangeConjunct(fid, feat.name, iv.lo, iv.hi))
    return out


def render_formulas(
    itemsets: Sequence[Itemset], meta: FeatureMetadata
) -> list[RenderedFormula]:
    """Render itemsets, collapsing ones that differ only in the value taken
    by a single positive categorical equality into one disjunctive formula."""
    rendered: list[RenderedFormula] = []
    # (other-conjuncts key, group) -> index into rendered
    merge_keys: dict[tuple, int] = {}
    # per rendered formula, the merge keys it currently has registered
    registered: dict[int, list[tuple]] = {}

    for its in itemsets:
        conjuncts = _conjuncts_of(its, meta)
        eq_positions = [
            (pos, c)
            for pos, c in enumerate(conjuncts)
            if isinstance(c, CategoryConjunct) and c.positive and len(c.values) == 1
        ]
        merged = False
        for pos, c in eq_positions:
            key = (_others_key(conjuncts, pos), c.group)
            target = merge_keys.get(key)
            if target is not None:
                tgt = rendered[target]
                for tpos, tc in enumerate(tgt.conjuncts):
                    if isinstance(tc, CategoryConjunct) and tc.positive and tc.group == c.group:
                        if c.values[0] not in tc.values:
                            tgt.conjuncts[tpos] = CategoryConjunct(
                                tc.group, tc.values + (c.values[0],), True
                            )
                        break
                tgt.sources.append(its)
                # Other keys of the target are stale now: its remaining
                # single-value equalities sit next to a disjunction.
                for other in registered.get(target, []):
                    if other != key:
                        merge_keys.pop(other, None)
                registered[target] = [key]
                merged = True
                break
        if merged:
            continue
        idx = len(rendered)
        rendered.append(RenderedFormula(conjuncts, [its]))
        keys = []
        for pos, c in eq_positions:
            key = (_others_key(conjuncts, pos), c.group)
            if key not in merge_keys:
                merge_keys[key] = idx
                keys.append(key)
        registered[idx] = keys
    return rendered


def _others_key(conjuncts: list[Conjunct], skip: int) -> tuple:
    return tuple(c for i, c in enumerate(conjuncts) if i != skip)
