"""Scoring and experiment tooling: discrimination scores, coverage curves,
greedy formula ranking, random instance generation, and the brute-force
discrimination oracle.

The oracle decides causal discrimination exactly for tree models: predictions
depend only on threshold comparisons, so checking one representative value per
threshold cell of each sensitive feature is equivalent to quantifying over the
whole (unbounded) flip set.
"""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import InputError
from .itemsets import Itemset
from .model import Ensemble, FeatureMetadata, predict_batch, predict_ensemble
from .stability import UnstableSet, flip_set_representatives, sensitive_cell_values
from .synthesis import FormulaSet


@dataclass
class InstanceSet:
    """A batch of instances (rows), optionally labeled."""

    X: np.ndarray
    labels: np.ndarray | None = None
    provenance: str = "test"

    def __post_init__(self) -> None:
        self.X = np.asarray(self.X, dtype=np.float64)
        if self.X.ndim != 2:
            raise InputError("instance set must be a 2-D array")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if len(self.labels) != len(self.X):
                raise InputError("labels length must match instance count")

    def __len__(self) -> int:
        return len(self.X)

    @property
    def num_features(self) -> int:
        return self.X.shape[1]

    def validate_against(self, meta: FeatureMetadata) -> None:
        if self.num_features != meta.num_features:
            raise InputError(
                f"dataset has {self.num_features} features, model expects {meta.num_features}"
            )
        for group, members in meta.groups.items():
            ones = (self.X[:, list(members)] > 0.5).sum(axis=1)
            if not (ones == 1).all():
                bad = int(np.nonzero(ones != 1)[0][0])
                raise InputError(
                    f"one-hot group {group!r} violated at row {bad}: expected exactly one active value"
                )

    @classmethod
    def from_csv(
        cls, path: str | Path, meta: FeatureMetadata, provenance: str = "test"
    ) -> InstanceSet:
        """Read a dataset CSV file: header with feature names in metadata
        order, optionally followed by a final ``label`` column."""
        return cls.from_csv_text(Path(path).read_text(), meta, provenance)

    @classmethod
    def from_csv_text(
        cls, text: str, meta: FeatureMetadata, provenance: str = "test"
    ) -> InstanceSet:
        rows = list(csv.reader(io.StringIO(text)))
        if not rows:
            raise InputError("empty dataset file")
        header, data = rows[0], rows[1:]
        names = [f.name for f in meta.features]
        has_label = False
        if header == names:
            pass
        elif header == names + ["label"]:
            has_label = True
        else:
            raise InputError(
                "dataset header must list the model's feature names in order"
                " (optionally followed by 'label')"
            )
        if not data:
            raise InputError("dataset has no instances")
        try:
            values = np.array([[float(v) for v in row] for row in data])
        except ValueError as exc:
            raise InputError(f"non-numeric value in dataset: {exc}") from exc
        if values.shape[1] != len(header):
            raise InputError("dataset row width does not match header")
        X = values[:, : len(names)]
        labels = values[:, -1].astype(np.int64) if has_label else None
        out = cls(X, labels, provenance)
        out.validate_against(meta)
        return out

    def to_csv(self, path: str | Path, meta: FeatureMetadata) -> None:
        names = [f.name for f in meta.features]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            if self.labels is not None:
                writer.writerow(names + ["label"])
                for row, lab in zip(self.X, self.labels):
                    writer.writerow([_fmt(v) for v in row] + [int(lab)])
            else:
                writer.writerow(names)
                for row in self.X:
                    writer.writerow([_fmt(v) for v in row])


def _fmt(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def count_covered_by_rectangles(U: UnstableSet, D: InstanceSet) -> int:
    return int(U.covers(D.X).sum())


def formulas_cover(itemsets: Sequence[Itemset], X: np.ndarray) -> np.ndarray:
    """Boolean mask over rows of X: satisfied by at least one itemset."""
    X = np.asarray(X, dtype=np.float64)
    out = np.zeros(len(X), dtype=bool)
    for its in itemsets:
        todo = ~out
        if not todo.any():
            break
        sub = X[todo]
        inside = np.ones(len(sub), dtype=bool)
        for f, iv in its.region.intervals.items():
            inside &= (iv.lo < sub[:, f]) & (sub[:, f] <= iv.hi)
        out[np.nonzero(todo)[0][inside]] = True
    return out


def count_covered_by_formulas(itemsets: Sequence[Itemset], D: InstanceSet) -> int:
    return int(formulas_cover(itemsets, D.X).sum())


def score_d(U: UnstableSet, D: InstanceSet) -> float:
    """Fraction of instances falling in some unstable rectangle: an upper
    bound on the causal discrimination score of the dataset."""
    if len(D) == 0:
        raise InputError("cannot score an empty instance set")
    return count_covered_by_rectangles(U, D) / len(D)


def score_dtilde(F: FormulaSet | Sequence[Itemset], D: InstanceSet) -> float:
    """One minus the fraction of instances proven fair by the formulas; an
    upper bound on score_d that coincides with it after a converged run.

    Computed as (n - covered) / n on exact integer counts, so that equality
    with score_d is exact when the underlying counts are complementary.
    """
    if len(D) == 0:
        raise InputError("cannot score an empty instance set")
    itemsets = F.itemsets if isinstance(F, FormulaSet) else F
    return (len(D) - count_covered_by_formulas(itemsets, D)) / len(D)


def accuracy(ensemble: Ensemble, D: InstanceSet) -> float:
    if D.labels is None:
        raise InputError("instance set has no labels")
    return float((predict_batch(ensemble, D.X) == D.labels).mean())


def oracle_is_discriminated(
    ensemble: Ensemble, sensitive: Iterable[int], x: Sequence[float]
) -> bool:
    """True iff some flip of the sensitive features changes the prediction."""
    S = frozenset(sensitive)
    if not S:
        return False
    base = predict_ensemble(ensemble, x)
    reps = flip_set_representatives(ensemble, S, x)
    return bool((predict_batch(ensemble, reps) != base).any())


def oracle_flags(
    ensemble: Ensemble, sensitive: Iterable[int], X: np.ndarray
) -> np.ndarray:
    """Vectorized oracle over instance rows.

    For numeric/binary sensitive features the flip combinations are
    instance-independent (one representative per threshold cell), so whole
    columns can be substituted at once. One-hot sensitive features fall back
    to the per-instance path because their admissible flips depend on which
    group value is currently active.
    """
    S = sorted(frozenset(sensitive))
    X = np.asarray(X, dtype=np.float64)
    if not S:
        return np.zeros(len(X), dtype=bool)
    meta = ensemble.metadata
    if any(meta.features[f].kind == "onehot" for f in S):
        return np.array(
            [oracle_is_discriminated(ensemble, S, x) for x in X], dtype=bool
        )
    cells = sensitive_cell_values(ensemble, S)
    base = predict_batch(ensemble, X)
    flagged = np.zeros(len(X), dtype=bool)
    for combo in itertools.product(*(cells[f] for f in S)):
        todo = ~flagged
        if not todo.any():
            break
        Z = X[todo].copy()
        for f, v in zip(S, combo):
            Z[:, f] = v
        differs = predict_batch(ensemble, Z) != base[todo]
        flagged[np.nonzero(todo)[0][differs]] = True
    return flagged


def gen_random_instances(meta: FeatureMetadata, n: int, seed: int) -> InstanceSet:
    """Uniform random instances: numeric in [0,1], binary in {0,1}, one
    uniformly chosen active value per one-hot group. Deterministic in seed."""
    if n < 1:
        raise InputError("n must be positive")
    rng = np.random.default_rng(seed)
    X = np.zeros((n, meta.num_features))
    done_groups: set[str] = set()
    for f in meta.features:
        if f.kind == "numeric":
            X[:, f.id] = rng.random(n)
        elif f.kind == "binary":
            X[:, f.id] = rng.integers(0, 2, n)
        else:
            if f.group in done_groups:
                continue
            members = list(meta.groups[f.group])
            choice = rng.integers(0, len(members), n)
            X[np.arange(n), np.array(members)[choice]] = 1.0
            done_groups.add(f.group)
    return InstanceSet(X, None, "random")


def coverage_curve(
    ensemble: Ensemble,
    sensitive: Iterable[int],
    D: InstanceSet,
    k_max: int,
    *,
    formulas: FormulaSet | None = None,
    **synth_kwargs,
) -> list[tuple[int, float]]:
    """Fraction of the oracle-fair instances of D covered by the formulas
    available after k iterations, for k = 0..k_max.

    A single synthesis run with ``max_iters=k_max`` supplies every prefix; a
    precomputed ``formulas`` set (from a run with at least k_max iterations)
    is reused when given.
    """
    if k_max < 1:
        raise InputError("k_max must be positive")
    S = frozenset(sensitive)
    from .synthesis import synthesize  # local import to avoid cycle at module load

    fs = formulas if formulas is not None else synthesize(
        ensemble, S, max_iters=k_max, **synth_kwargs
    )
    fair_mask = ~oracle_flags(ensemble, S, D.X)
    total = int(fair_mask.sum())
    curve: list[tuple[int, float]] = []
    for k in range(0, k_max + 1):
        if total == 0:
            curve.append((k, 1.0))
            continue
        covered = formulas_cover(fs.up_to(k), D.X[fair_mask])
        curve.append((k, int(covered.sum()) / total))
    return curve


@dataclass(frozen=True)
class RankedFormula:
    itemset: Itemset
    covered: int


def top_k_greedy(
    F: FormulaSet | Sequence[Itemset], D_train: InstanceSet, k: int
) -> list[RankedFormula]:
    """Pick up to k formulas by greedy marginal coverage of D_train.

    Each round selects the itemset covering the most still-uncovered
    instances (ties broken by canonical itemset order) and removes what it
    covers; stops early when nothing is covered anymore.
    """
    if k < 1:
        raise InputError("k must be positive")
    itemsets = list(F.itemsets if isinstance(F, FormulaSet) else F)
    order = sorted(range(len(itemsets)), key=lambda i: itemsets[i].sort_key())
    cover = [
        formulas_cover([itemsets[i]], D_train.X) for i in range(len(itemsets))
    ]
    remaining = np.ones(len(D_train), dtype=bool)
    picked: list[RankedFormula] = []
    chosen: set[int] = set()
    for _ in range(min(k, len(itemsets))):
        best_i, best_count = -1, 0
        for i in order:
            if i in chosen:
                continue
            count = int((cover[i] & remaining).sum())
            if count > best_count:
                best_i, best_count = i, count
        if best_i < 0:
            break
        chosen.add(best_i)
        picked.append(RankedFormula(itemsets[best_i], best_count))
        remaining &= ~cover[best_i]
    return picked
