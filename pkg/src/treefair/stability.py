"""Data-independent stability analysis via equivalence-class enumeration.

The feature space is partitioned into the equivalence classes induced by the
ensemble: each class is the non-empty intersection of one root-to-leaf region
per tree, and every instance inside it receives the same majority-vote label.
``analyze`` then pairs classes to find where changing only sensitive features
can change the prediction, returning a set of hyper-rectangles U that
over-approximates the discriminable region: every instance suffering causal
discrimination lies in some rectangle of U (the converse need not hold).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import InputError, ResourceLimitError
from .geometry import NEG_INF, POS_INF, HyperRectangle, Interval
from .model import Ensemble, Internal, Leaf, TreeNode, thresholds_per_feature

DEFAULT_MAX_CLASSES = 1_000_000


@dataclass(frozen=True)
class EquivalenceClass:
    """A region of the feature space on which the ensemble is constant."""

    region: HyperRectangle
    label: int


@dataclass
class EquivalenceClasses:
    """Array-backed class list: rows of (lo, hi) bounds plus a label each."""

    lo: np.ndarray  # (n, d)
    hi: np.ndarray  # (n, d)
    labels: np.ndarray  # (n,)

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def num_features(self) -> int:
        return self.lo.shape[1]

    def region(self, i: int) -> HyperRectangle:
        return _row_to_rectangle(self.lo[i], self.hi[i])

    def to_classes(self) -> list[EquivalenceClass]:
        return [EquivalenceClass(self.region(i), int(self.labels[i])) for i in range(len(self))]

    def membership_row(self, x: Sequence[float]) -> np.ndarray:
        """Boolean mask of the classes containing ``x`` (exactly one, by the
        partition property)."""
        xv = np.asarray(x, dtype=np.float64)
        return ((self.lo < xv) & (xv <= self.hi)).all(axis=1)


def _row_to_rectangle(lo: np.ndarray, hi: np.ndarray, rid: int | None = None) -> HyperRectangle:
    intervals = {
        int(f): Interval(float(lo[f]), float(hi[f]))
        for f in range(len(lo))
        if lo[f] != NEG_INF or hi[f] != POS_INF
    }
    return HyperRectangle(intervals, rid)


def leaf_boxes(tree: TreeNode, d: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Root-to-leaf regions of one tree, left-before-right.

    Returns (lo, hi, labels) arrays of shape (L, d), (L, d), (L,). Paths whose
    predicates contradict each other (unreachable leaves) are dropped.
    """
    los: list[np.ndarray] = []
    his: list[np.ndarray] = []
    labels: list[int] = []

    lo = np.full(d, NEG_INF)
    hi = np.full(d, POS_INF)

    def walk(node: TreeNode) -> None:
        if isinstance(node, Leaf):
            los.append(lo.copy())
            his.append(hi.copy())
            labels.append(node.label)
            return
        f, v = node.feature, node.threshold
        old_hi = hi[f]
        if lo[f] < min(old_hi, v):  # left region (lo, min(hi, v)] non-empty
            hi[f] = min(old_hi, v)
            walk(node.left)
            hi[f] = old_hi
        old_lo = lo[f]
        if max(old_lo, v) < hi[f]:  # right region (max(lo, v), hi] non-empty
            lo[f] = max(old_lo, v)
            walk(node.right)
            lo[f] = old_lo

    walk(tree)
    return np.array(los), np.array(his), np.array(labels, dtype=np.int64)


def enumerate_equivalence_classes(
    ensemble: Ensemble, max_classes: int = DEFAULT_MAX_CLASSES
) -> EquivalenceClasses:
    """Tree-by-tree product of leaf regions with eager pruning.

    Partial combinations with an empty intersection are abandoned immediately,
    so only the non-empty cells of the overlay survive. Classes come out in a
    deterministic order: trees in ensemble order, leaves left-before-right.
    """
    d = ensemble.num_features
    per_tree = [leaf_boxes(t, d) for t in ensemble.trees]

    lo = np.full((1, d), NEG_INF)
    hi = np.full((1, d), POS_INF)
    votes = np.zeros((1, ensemble.num_labels), dtype=np.int32)

    for t_lo, t_hi, t_labels in per_tree:
        n_leaves = len(t_labels)
        # Broadcasting partials x leaves x d can get large; bound the
        # temporary arrays by processing partials in chunks.
        chunk = max(1, 8_000_000 // max(1, n_leaves * d))
        lo_parts: list[np.ndarray] = []
        hi_parts: list[np.ndarray] = []
        vote_parts: list[np.ndarray] = []
        total = 0
        for start in range(0, len(lo), chunk):
            c_lo = lo[start : start + chunk]
            c_hi = hi[start : start + chunk]
            new_lo = np.maximum(c_lo[:, None, :], t_lo[None, :, :])
            new_hi = np.minimum(c_hi[:, None, :], t_hi[None, :, :])
            alive = (new_lo < new_hi).all(axis=2)  # (partials, leaves)
            p_idx, l_idx = np.nonzero(alive)
            total += len(p_idx)
            if total > max_classes:
                raise ResourceLimitError(
                    f"equivalence-class enumeration exceeded {max_classes} classes",
                    max_classes,
                )
            lo_parts.append(new_lo[p_idx, l_idx])
            hi_parts.append(new_hi[p_idx, l_idx])
            new_votes = votes[start : start + chunk][p_idx]
            new_votes[np.arange(len(l_idx)), t_labels[l_idx]] += 1
            vote_parts.append(new_votes)
        lo = np.concatenate(lo_parts) if lo_parts else np.zeros((0, d))
        hi = np.concatenate(hi_parts) if hi_parts else np.zeros((0, d))
        votes = (
            np.concatenate(vote_parts)
            if vote_parts
            else np.zeros((0, ensemble.num_labels), dtype=np.int32)
        )

    labels = np.argmax(votes, axis=1)  # smallest label id wins ties
    return EquivalenceClasses(lo, hi, labels.astype(np.int64))


@dataclass
class UnstableSet:
    """Hyper-rectangles over-approximating the discriminable region.

    Rows are indexed by dense ids 0..len-1; ``lo``/``hi`` are (m, d) bound
    arrays with +-inf for unconstrained sides.
    """

    lo: np.ndarray
    hi: np.ndarray

    def __len__(self) -> int:
        return len(self.lo)

    @property
    def num_features(self) -> int:
        return self.lo.shape[1]

    @property
    def rectangles(self) -> tuple[HyperRectangle, ...]:
        return tuple(_row_to_rectangle(self.lo[i], self.hi[i], i) for i in range(len(self)))

    @classmethod
    def from_hyperrectangles(
        cls,
        rects: Iterable[HyperRectangle],
        num_features: int,
        prune_contained: bool = False,
    ) -> UnstableSet:
        """Build from explicit rectangles (deduplicated by exact region equality).

        ``prune_contained`` additionally drops rectangles whose region is
        contained in an earlier-kept one; the union of the set is unchanged.
        """
        rows: list[tuple[np.ndarray, np.ndarray]] = []
        seen: set[tuple] = set()
        kept: list[HyperRectangle] = []
        for r in rects:
            k = r.key()
            if k in seen:
                continue
            seen.add(k)
            if prune_contained:
                if any(r.subset_of(p) for p in kept):
                    continue
                kept.append(r)
            lo = np.full(num_features, NEG_INF)
            hi = np.full(num_features, POS_INF)
            for f, iv in r.intervals.items():
                if not 0 <= f < num_features:
                    raise InputError(f"rectangle constrains unknown feature {f}")
                lo[f] = iv.lo
                hi[f] = iv.hi
            rows.append((lo, hi))
        if rows:
            lo_arr = np.vstack([r[0] for r in rows])
            hi_arr = np.vstack([r[1] for r in rows])
        else:
            lo_arr = np.zeros((0, num_features))
            hi_arr = np.zeros((0, num_features))
        return cls(lo_arr, hi_arr)

    def covers(self, X: np.ndarray) -> np.ndarray:
        """Boolean mask over rows of X: inside at least one rectangle."""
        X = np.asarray(X, dtype=np.float64)
        out = np.zeros(len(X), dtype=bool)
        for i in range(len(self)):
            todo = ~out
            if not todo.any():
                break
            sub = X[todo]
            inside = ((self.lo[i] < sub) & (sub <= self.hi[i])).all(axis=1)
            out[np.nonzero(todo)[0][inside]] = True
        return out

    def to_json(self) -> list[dict]:
        return [r.to_json() for r in self.rectangles]

    @classmethod
    def from_json(cls, doc: list[dict], num_features: int) -> UnstableSet:
        return cls.from_hyperrectangles(
            [HyperRectangle.from_json(r) for r in doc], num_features
        )


def analyze(
    ensemble: Ensemble,
    sensitive: Iterable[int],
    max_classes: int = DEFAULT_MAX_CLASSES,
    prune_contained: bool = False,
) -> UnstableSet:
    """Stability analysis: rectangles where causal discrimination may occur.

    Every ordered pair of equivalence classes with (i) different labels,
    (ii) overlapping regions on all non-sensitive features, and (iii)
    different intervals on some sensitive feature contributes both regions
    to U. Rectangle ids follow first-discovery order of the pair scan, which
    is deterministic given the deterministic class enumeration.
    """
    S = frozenset(sensitive)
    d = ensemble.num_features
    if not S:
        raise InputError("sensitive feature set must be non-empty")
    for f in S:
        if not 0 <= f < d:
            raise InputError(f"unknown feature id {f}")

    classes = enumerate_equivalence_classes(ensemble, max_classes)
    order = _unstable_class_order(classes, S)

    if prune_contained:
        # Vacuous for class regions (pairwise disjoint boxes cannot nest),
        # but honoured for symmetry with externally supplied sets.
        rects = [classes.region(i) for i in order]
        return UnstableSet.from_hyperrectangles(rects, d, prune_contained=True)
    return UnstableSet(classes.lo[order].copy(), classes.hi[order].copy())


def _unstable_class_order(classes: EquivalenceClasses, S: frozenset[int]) -> list[int]:
    """Indices of the classes belonging to U, in first-discovery order of the
    lexicographic scan over class pairs (i, j), i < j.

    The quadratic pair space is traversed in vectorized tiles. Column pools
    are pre-restricted per row: only opposite-label partners matter, and a
    pair where both sides leave every sensitive feature unconstrained can
    never satisfy the different-interval condition, so rows without a bounded
    sensitive interval only scan bounded partners.
    """
    n = len(classes)
    d = classes.num_features
    s_mask = np.zeros(d, dtype=bool)
    s_mask[list(S)] = True

    lo, hi, labels = classes.lo, classes.hi, classes.labels
    lo_ns = np.ascontiguousarray(lo[:, ~s_mask])
    hi_ns = np.ascontiguousarray(hi[:, ~s_mask])
    lo_s = np.ascontiguousarray(lo[:, s_mask])
    hi_s = np.ascontiguousarray(hi[:, s_mask])
    s_bounded = ((lo_s != NEG_INF) | (hi_s != POS_INF)).any(axis=1)

    # Column pools: for each label value, the opposite-label class indices
    # (ascending), and the bounded-sensitive subset of those.
    pools: dict[int, np.ndarray] = {}
    pools_bnd: dict[int, np.ndarray] = {}
    for lab in np.unique(labels):
        opp = np.nonzero(labels != lab)[0]
        pools[int(lab)] = opp
        pools_bnd[int(lab)] = opp[s_bounded[opp]]

    def qualify(rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        """Hit matrix over rows x cols (labels already known to differ)."""
        ok = np.ones((len(rows), len(cols)), dtype=bool)
        for k in range(lo_ns.shape[1]):
            np.logical_and(
                ok,
                np.maximum(lo_ns[rows, k][:, None], lo_ns[cols, k][None, :])
                < np.minimum(hi_ns[rows, k][:, None], hi_ns[cols, k][None, :]),
                out=ok,
            )
            if not ok.any():
                return ok
        differs = np.zeros_like(ok)
        for k in range(lo_s.shape[1]):
            differs |= lo_s[rows, k][:, None] != lo_s[cols, k][None, :]
            differs |= hi_s[rows, k][:, None] != hi_s[cols, k][None, :]
        return ok & differs

    added = np.zeros(n, dtype=bool)
    order: list[int] = []
    tile = max(4, min(n, 4_000_000 // max(1, n)))

    for start in range(0, n, tile):
        stop = min(start + tile, n)
        hits_by_row: dict[int, np.ndarray] = {}
        tile_rows = np.arange(start, stop)
        for lab in pools:
            for bounded_rows in (True, False):
                rows = tile_rows[
                    (labels[tile_rows] == lab)
                    & (s_bounded[tile_rows] == bounded_rows)
                ]
                if len(rows) == 0:
                    continue
                pool = pools[lab] if bounded_rows else pools_bnd[lab]
                cols = pool[np.searchsorted(pool, start + 1) :]
                if len(cols) == 0:
                    continue
                hit = qualify(rows, cols)
                for r, i in enumerate(rows):
                    row_hits = cols[hit[r] & (cols > i)]
                    if len(row_hits):
                        hits_by_row[int(i)] = row_hits
        for i in sorted(hits_by_row):
            hits = hits_by_row[i]
            if not added[i]:
                added[i] = True
                order.append(i)
            new = hits[~added[hits]]
            added[new] = True
            order.extend(int(j) for j in new)
    return order


def flip_set_representatives(
    ensemble: Ensemble, sensitive: Iterable[int], x: Sequence[float]
) -> np.ndarray:
    """Finite representatives of the flip set of ``x``, exhaustive up to
    threshold-cell equivalence.

    For each sensitive numeric feature the candidate values are the model's
    thresholds for that feature, the midpoints between consecutive thresholds,
    one value below the least and one above the greatest, plus x's own value.
    Binary and one-hot features use {0, 1}, with one-hot reassignments
    restricted to keeping exactly one active value per group. The result is
    the Cartesian product across sensitive features (duplicates removed),
    always including ``x`` itself.
    """
    S = sorted(frozenset(sensitive))
    x = np.asarray(x, dtype=np.float64)
    d = ensemble.num_features
    if len(x) != d:
        raise InputError(f"instance has {len(x)} values, expected {d}")
    if not S:
        return x[None, :].copy()

    meta = ensemble.metadata
    thresholds = thresholds_per_feature(ensemble)

    # Scalar choices for non-grouped sensitive features.
    scalar_choices: list[tuple[int, list[float]]] = []
    onehot_groups: dict[str, list[int]] = {}
    for f in S:
        kind = meta.features[f].kind
        if kind == "onehot":
            onehot_groups.setdefault(meta.features[f].group, []).append(f)
        elif kind == "binary":
            scalar_choices.append((f, [0.0, 1.0]))
        else:
            scalar_choices.append((f, _cell_values(thresholds.get(f, []), x[f])))

    # Group assignments: which member (by id) carries the 1. The active value
    # may move only between sensitive members; if the currently active member
    # is outside S, the group cannot change at all.
    group_assignments: list[tuple[tuple[int, ...], list[tuple[float, ...]]]] = []
    for group, members_in_s in onehot_groups.items():
        members = list(meta.groups[group])
        current = tuple(x[m] for m in members)
        options = [current]
        hot = [m for m in members if x[m] > 0.5]
        if len(hot) == 1 and hot[0] in members_in_s:
            for target in members_in_s:
                if target != hot[0]:
                    options.append(tuple(1.0 if m == target else 0.0 for m in members))
        group_assignments.append((tuple(members), options))

    reps: list[np.ndarray] = []
    scalar_lists = [vals for _, vals in scalar_choices]
    for combo in itertools.product(*scalar_lists):
        for group_combo in itertools.product(*(opts for _, opts in group_assignments)):
            z = x.copy()
            for (f, _), v in zip(scalar_choices, combo):
                z[f] = v
            for (members, _), values in zip(group_assignments, group_combo):
                for m, v in zip(members, values):
                    z[m] = v
            reps.append(z)

    out = np.vstack(reps)
    _, unique_idx = np.unique(out, axis=0, return_index=True)
    return out[np.sort(unique_idx)]


def _cell_values(thresholds: Sequence[float], own: float) -> list[float]:
    """Threshold-cell representatives plus the instance's own value."""
    if not thresholds:
        return [float(own)]
    vals = [thresholds[0] - 1.0]
    for a, b in zip(thresholds, thresholds[1:]):
        vals.append(a)
        vals.append((a + b) / 2.0)
    vals.append(thresholds[-1])
    vals.append(thresholds[-1] + 1.0)
    vals.append(float(own))
    return sorted(set(vals))


def sensitive_cell_values(ensemble: Ensemble, sensitive: Iterable[int]) -> dict[int, list[float]]:
    """One representative value per threshold cell for each sensitive feature.

    Instance-independent companion of :func:`flip_set_representatives`, used
    by the batched discrimination oracle: replacing a sensitive feature by
    each of these values visits every threshold cell the feature can fall in.
    """
    thresholds = thresholds_per_feature(ensemble)
    meta = ensemble.metadata
    out: dict[int, list[float]] = {}
    for f in sorted(frozenset(sensitive)):
        if meta.features[f].kind in ("binary", "onehot"):
            out[f] = [0.0, 1.0]
        else:
            ts = thresholds.get(f, [])
            out[f] = list(ts) + [(ts[-1] + 1.0) if ts else 0.0]
    return out
