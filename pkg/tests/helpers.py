"""Shared test machinery: random ensemble generation, a tiny CART trainer for
realistic correlated forests, exhaustive threshold-cell grids, and a
fine-grained flip oracle independent of the library's representative
construction."""

from __future__ import annotations

import itertools

import numpy as np

from treefair.model import (
    Ensemble,
    Feature,
    FeatureMetadata,
    Internal,
    Leaf,
    predict_batch,
    thresholds_per_feature,
)


def numeric_metadata(d: int) -> FeatureMetadata:
    return FeatureMetadata(tuple(Feature(i, f"x{i}") for i in range(d)))


def binary_sensitive_metadata(d: int) -> FeatureMetadata:
    """Feature 0 is a binary sensitive attribute, the rest are numeric."""
    return FeatureMetadata(
        (Feature(0, "sensitive", "binary"),)
        + tuple(Feature(i, f"x{i}") for i in range(1, d))
    )


def random_tree(rng: np.random.Generator, d: int, depth: int, binary_first: bool = False):
    """Random tree with thresholds drawn from the 0.1 grid inside (0, 1);
    splits on feature 0 use threshold 0.5 when it is a binary feature."""
    if depth == 0 or rng.random() < 0.2:
        return Leaf(int(rng.integers(0, 2)))
    feature = int(rng.integers(0, d))
    if binary_first and feature == 0:
        threshold = 0.5
    else:
        threshold = round(float(rng.integers(1, 10)) / 10.0, 1)
    return Internal(
        feature,
        threshold,
        random_tree(rng, d, depth - 1, binary_first),
        random_tree(rng, d, depth - 1, binary_first),
    )


def random_ensemble(
    seed: int,
    max_trees: int = 5,
    max_depth: int = 4,
    max_features: int = 6,
    max_grid: int = 50_000,
) -> Ensemble:
    """Random small ensemble whose full threshold-cell grid stays tractable.

    Regenerates until the cell grid has at most ``max_grid`` points so that
    exhaustive sweeps stay fast; this only skews the population toward
    smaller models, which the sweeps allow.
    """
    rng = np.random.default_rng(seed)
    while True:
        d = int(rng.integers(2, max_features + 1))
        n_trees = int(rng.integers(1, max_trees + 1))
        depth = int(rng.integers(1, max_depth + 1))
        trees = tuple(random_tree(rng, d, depth) for _ in range(n_trees))
        if not any(isinstance(t, Internal) for t in trees):
            continue
        ens = Ensemble(trees, ("0", "1"), numeric_metadata(d))
        if grid_size(ens) <= max_grid:
            return ens


import functools


@functools.lru_cache(maxsize=None)
def sweep_instance(seed: int, max_candidates: int = 200_000):
    """A random small ensemble with a binary sensitive feature on which the
    synthesis converges within a modest candidate budget, plus its converged
    analysis artifacts. Cached: callers must not mutate the results.

    Returns (ensemble, sensitive_ids, unstable_set, formula_set). Structural
    caps: <=5 trees, depth <=4, <=6 features, thresholds on the 0.1 grid.
    Deterministic in ``seed``: candidate models are drawn from a seeded
    stream until one both keeps the threshold-cell grid tractable and
    converges; the skew toward smaller models is intentional, exact sweeps
    only need small instances.
    """
    from treefair.stability import analyze
    from treefair.synthesis import synthesize_from_unstable

    rng = np.random.default_rng(seed)
    while True:
        d = int(rng.integers(2, 7))
        n_trees = int(rng.integers(1, 6))
        depth = int(rng.integers(1, 5))
        trees = tuple(random_tree(rng, d, depth, binary_first=True) for _ in range(n_trees))
        if not any(isinstance(t, Internal) for t in trees):
            continue
        ens = Ensemble(trees, ("0", "1"), binary_sensitive_metadata(d))
        if grid_size(ens) > 20_000:
            continue
        sensitive = frozenset({0})
        U = analyze(ens, sensitive)
        fs = synthesize_from_unstable(
            U, ens.metadata, max_candidates=max_candidates
        )
        if fs.converged:
            return ens, sensitive, U, fs


def grid_size(ensemble: Ensemble) -> int:
    thresholds = thresholds_per_feature(ensemble)
    size = 1
    for f in range(ensemble.num_features):
        size *= len(thresholds.get(f, [])) + 1
    return size


def threshold_cell_grid(ensemble: Ensemble) -> np.ndarray:
    """One representative instance per threshold cell of every feature.

    The thresholds themselves represent the cells they close on the right;
    one extra value represents the unbounded top cell.
    """
    thresholds = thresholds_per_feature(ensemble)
    axes = []
    for f in range(ensemble.num_features):
        ts = thresholds.get(f, [])
        axes.append(list(ts) + [ts[-1] + 1.0] if ts else [0.0])
    return np.array(list(itertools.product(*axes)))


def fine_flip_oracle(
    ensemble: Ensemble, sensitive: frozenset[int], X: np.ndarray, per_feature: int = 23
) -> np.ndarray:
    """Discrimination check via dense value sampling, independent of the
    library's threshold-cell representative construction.

    Samples a fixed fine lattice of values (plus all model thresholds and
    their neighborhoods) for each sensitive feature and tries every
    combination. Used to cross-validate derived expectations.
    """
    thresholds = thresholds_per_feature(ensemble)
    value_sets = []
    for f in sorted(sensitive):
        vals = set(np.linspace(-1.5, 2.5, per_feature).round(4).tolist())
        for t in thresholds.get(f, []):
            vals.update((t - 1e-3, t, t + 1e-3))
        value_sets.append(sorted(vals))
    base = predict_batch(ensemble, X)
    flagged = np.zeros(len(X), dtype=bool)
    for combo in itertools.product(*value_sets):
        Z = X.copy()
        for f, v in zip(sorted(sensitive), combo):
            Z[:, f] = v
        flagged |= predict_batch(ensemble, Z) != base
    return flagged


# ---------------------------------------------------------------------------
# Tiny CART trainer: produces realistic, correlated forests for the
# performance-oriented tests without an external ML dependency.


def train_cart(
    X: np.ndarray,
    y: np.ndarray,
    max_depth: int,
    rng: np.random.Generator,
    feature_fraction: float = 0.7,
    min_leaf: int = 4,
):
    def gini(counts: np.ndarray) -> float:
        total = counts.sum()
        if total == 0:
            return 0.0
        p = counts / total
        return 1.0 - float((p * p).sum())

    n_labels = int(y.max()) + 1

    def build(idx: np.ndarray, depth: int):
        counts = np.bincount(y[idx], minlength=n_labels)
        majority = int(np.argmax(counts))
        if depth == 0 or len(idx) < 2 * min_leaf or gini(counts) == 0.0:
            return Leaf(majority)
        d = X.shape[1]
        n_feats = max(1, int(d * feature_fraction))
        feats = rng.choice(d, size=n_feats, replace=False)
        best = None
        for f in feats:
            vals = np.unique(X[idx, f].round(3))
            if len(vals) < 2:
                continue
            cuts = (vals[:-1] + vals[1:]) / 2.0
            if len(cuts) > 8:
                cuts = cuts[:: max(1, len(cuts) // 8)]
            for cut in cuts:
                left = idx[X[idx, f] <= cut]
                right = idx[X[idx, f] > cut]
                if len(left) < min_leaf or len(right) < min_leaf:
                    continue
                score = (
                    len(left) * gini(np.bincount(y[left], minlength=n_labels))
                    + len(right) * gini(np.bincount(y[right], minlength=n_labels))
                ) / len(idx)
                if best is None or score < best[0]:
                    best = (score, int(f), float(round(cut, 3)), left, right)
        if best is None:
            return Leaf(majority)
        _, f, cut, left, right = best
        return Internal(f, cut, build(left, depth - 1), build(right, depth - 1))

    return build(np.arange(len(X)), max_depth)


def trained_forest(
    seed: int,
    n_trees: int,
    max_depth: int,
    d: int,
    n_samples: int = 1500,
    n_numeric: int = 6,
    min_leaf: int = 4,
) -> Ensemble:
    """Forest of CART trees trained on bootstrap samples of a synthetic
    tabular dataset shaped like the public fairness benchmarks: mostly
    binary columns (one shared 0.5 threshold each) plus a few numeric
    columns quantized to a coarse grid, so the trees share thresholds and
    the ensemble's equivalence-class overlay stays tractable.

    Feature 0 is binary and plays the sensitive role.
    """
    rng = np.random.default_rng(seed)
    X = np.zeros((n_samples, d))
    numeric = set(range(1, 1 + n_numeric))
    for f in range(d):
        if f in numeric:
            X[:, f] = np.round(rng.random(n_samples) * 10) / 10
        else:
            X[:, f] = rng.integers(0, 2, n_samples)
    w = rng.normal(size=d)
    logits = X @ w + 0.6 * (X[:, min(numeric)] > 0.5) * X[:, 0]
    y = (logits > np.median(logits)).astype(np.int64)
    trees = []
    for _ in range(n_trees):
        boot = rng.integers(0, n_samples, n_samples)
        trees.append(train_cart(X[boot], y[boot], max_depth, rng, min_leaf=min_leaf))
    features = [Feature(0, "sensitive", "binary")]
    for f in range(1, d):
        kind = "numeric" if f in numeric else "binary"
        features.append(Feature(f, f"x{f}", kind))
    return Ensemble(tuple(trees), ("neg", "pos"), FeatureMetadata(tuple(features)))
