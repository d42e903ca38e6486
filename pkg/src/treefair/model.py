"""Decision-tree ensembles: parsing, validation, and majority-vote prediction.

Model documents follow a portable JSON schema::

    {"num_features": int, "labels": [str],
     "features": [{"id": int, "name": str,
                   "kind": "numeric"|"binary"|"onehot", "group": str|null}],
     "trees": [node]}
    node := {"leaf": int}
          | {"feature": int, "threshold": number, "left": node, "right": node}

An instance takes the left branch iff ``x[feature] <= threshold``. Binary and
one-hot features hold values in {0, 1} and are split at threshold 0.5. All
model values are immutable after parsing and safe to share across workers.
"""

from __future__ import annotations

import json
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any, Literal, Union

import numpy as np

from .errors import InputError, ModelFormatError

FeatureKind = Literal["numeric", "binary", "onehot"]

_KINDS: tuple[str, ...] = ("numeric", "binary", "onehot")


@dataclass(frozen=True, slots=True)
class Feature:
    id: int
    name: str
    kind: FeatureKind = "numeric"
    group: str | None = None


@dataclass(frozen=True)
class FeatureMetadata:
    """Per-feature descriptors, indexed by contiguous feature ids 0..d-1."""

    features: tuple[Feature, ...]
    _by_name: dict[str, int] = field(init=False, repr=False, compare=False)
    _groups: dict[str, tuple[int, ...]] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        ids = sorted(f.id for f in self.features)
        if ids != list(range(len(self.features))):
            raise ModelFormatError("feature ids must be exactly 0..num_features-1", "features")
        ordered = tuple(sorted(self.features, key=lambda f: f.id))
        object.__setattr__(self, "features", ordered)
        by_name: dict[str, int] = {}
        groups: dict[str, list[int]] = {}
        for f in ordered:
            if f.name in by_name:
                raise ModelFormatError(f"duplicate feature name {f.name!r}", f"features[{f.id}]")
            by_name[f.name] = f.id
            if f.kind == "onehot":
                if not f.group:
                    raise ModelFormatError(
                        "onehot feature without group", f"features[{f.id}]"
                    )
                groups.setdefault(f.group, []).append(f.id)
            elif f.group is not None:
                raise ModelFormatError(
                    f"{f.kind} feature must not carry a group", f"features[{f.id}]"
                )
        object.__setattr__(self, "_by_name", by_name)
        object.__setattr__(self, "_groups", {g: tuple(ms) for g, ms in groups.items()})

    @property
    def num_features(self) -> int:
        return len(self.features)

    @property
    def groups(self) -> Mapping[str, tuple[int, ...]]:
        """One-hot group name -> member feature ids."""
        return self._groups

    def feature(self, fid: int) -> Feature:
        try:
            return self.features[fid]
        except IndexError:
            raise InputError(f"unknown feature id {fid}") from None

    def group_of(self, fid: int) -> str | None:
        return self.features[fid].group

    def resolve(self, names_or_ids: Iterable[str | int]) -> frozenset[int]:
        """Map feature names or ids to a set of feature ids."""
        out: set[int] = set()
        for item in names_or_ids:
            if isinstance(item, int) or (isinstance(item, str) and item.isdigit()):
                fid = int(item)
                if not 0 <= fid < self.num_features:
                    raise InputError(f"unknown feature id {fid}")
                out.add(fid)
            else:
                fid = self._by_name.get(item)
                if fid is None:
                    raise InputError(f"unknown feature {item!r}")
                out.add(fid)
        return frozenset(out)

    def to_json(self) -> list[dict[str, Any]]:
        return [
            {"id": f.id, "name": f.name, "kind": f.kind, "group": f.group}
            for f in self.features
        ]


@dataclass(frozen=True, slots=True)
class Leaf:
    label: int


@dataclass(frozen=True, slots=True)
class Internal:
    feature: int
    threshold: float
    left: "TreeNode"
    right: "TreeNode"


TreeNode = Union[Leaf, Internal]


@dataclass(frozen=True)
class Ensemble:
    """A non-empty set of decision trees combined by majority vote."""

    trees: tuple[TreeNode, ...]
    labels: tuple[str, ...]
    metadata: FeatureMetadata

    @property
    def num_features(self) -> int:
        return self.metadata.num_features

    @property
    def num_labels(self) -> int:
        return len(self.labels)

    def to_json(self) -> dict[str, Any]:
        return {
            "num_features": self.num_features,
            "labels": list(self.labels),
            "features": self.metadata.to_json(),
            "trees": [_node_to_json(t) for t in self.trees],
        }


def parse_model(source: bytes | str | Mapping[str, Any]) -> Ensemble:
    """Parse and validate a model document (bytes, JSON text, or dict)."""
    if isinstance(source, (bytes, str)):
        try:
            doc = json.loads(source)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"malformed JSON: {exc}") from exc
    else:
        doc = source
    if not isinstance(doc, Mapping):
        raise ModelFormatError("model document must be a JSON object")

    num_features = doc.get("num_features")
    if not isinstance(num_features, int) or num_features < 1:
        raise ModelFormatError("num_features must be a positive integer", "num_features")
    labels = doc.get("labels")
    if not isinstance(labels, list) or not labels or not all(isinstance(l, str) for l in labels):
        raise ModelFormatError("labels must be a non-empty list of strings", "labels")

    raw_features = doc.get("features")
    if not isinstance(raw_features, list) or len(raw_features) != num_features:
        raise ModelFormatError(
            f"features must list exactly num_features={num_features} entries", "features"
        )
    features = []
    for i, rf in enumerate(raw_features):
        loc = f"features[{i}]"
        if not isinstance(rf, Mapping):
            raise ModelFormatError("feature entry must be an object", loc)
        fid = rf.get("id")
        name = rf.get("name")
        kind = rf.get("kind", "numeric")
        group = rf.get("group")
        if not isinstance(fid, int):
            raise ModelFormatError("feature id must be an integer", loc)
        if not isinstance(name, str) or not name:
            raise ModelFormatError("feature name must be a non-empty string", loc)
        if kind not in _KINDS:
            raise ModelFormatError(f"unknown feature kind {kind!r}", loc)
        if group is not None and not isinstance(group, str):
            raise ModelFormatError("feature group must be a string or null", loc)
        features.append(Feature(fid, name, kind, group))
    metadata = FeatureMetadata(tuple(features))

    raw_trees = doc.get("trees")
    if not isinstance(raw_trees, list) or not raw_trees:
        raise ModelFormatError("trees must be a non-empty list", "trees")
    trees = tuple(
        _parse_node(rt, num_features, len(labels), f"trees[{i}]")
        for i, rt in enumerate(raw_trees)
    )
    return Ensemble(trees, tuple(labels), metadata)


def _parse_node(obj: Any, d: int, num_labels: int, loc: str) -> TreeNode:
    if not isinstance(obj, Mapping):
        raise ModelFormatError("tree node must be an object", loc)
    if "leaf" in obj:
        label = obj["leaf"]
        if not isinstance(label, int) or not 0 <= label < num_labels:
            raise ModelFormatError(f"label id out of range: {label!r}", f"{loc}.leaf")
        return Leaf(label)
    if "feature" not in obj:
        raise ModelFormatError("node needs either 'leaf' or 'feature'", loc)
    fid = obj["feature"]
    if not isinstance(fid, int) or not 0 <= fid < d:
        raise ModelFormatError(f"unknown feature {fid!r}", f"{loc}.feature")
    thr = obj.get("threshold")
    if not isinstance(thr, (int, float)) or isinstance(thr, bool) or not np.isfinite(thr):
        raise ModelFormatError(f"threshold must be a finite number, got {thr!r}", f"{loc}.threshold")
    if "left" not in obj or "right" not in obj:
        raise ModelFormatError("internal node needs 'left' and 'right'", loc)
    left = _parse_node(obj["left"], d, num_labels, f"{loc}.left")
    right = _parse_node(obj["right"], d, num_labels, f"{loc}.right")
    return Internal(fid, float(thr), left, right)


def _node_to_json(node: TreeNode) -> dict[str, Any]:
    if isinstance(node, Leaf):
        return {"leaf": node.label}
    return {
        "feature": node.feature,
        "threshold": node.threshold,
        "left": _node_to_json(node.left),
        "right": _node_to_json(node.right),
    }


def predict_tree(tree: TreeNode, x: Sequence[float]) -> int:
    """Label of the unique leaf reached by ``x`` (left iff ``x[f] <= v``)."""
    node = tree
    while isinstance(node, Internal):
        node = node.left if x[node.feature] <= node.threshold else node.right
    return node.label


def predict_ensemble(ensemble: Ensemble, x: Sequence[float]) -> int:
    """Majority vote over tree predictions; ties go to the smallest label id."""
    votes = [0] * ensemble.num_labels
    for tree in ensemble.trees:
        votes[predict_tree(tree, x)] += 1
    return max(range(ensemble.num_labels), key=lambda l: (votes[l], -l))


def predict_tree_batch(tree: TreeNode, X: np.ndarray) -> np.ndarray:
    """Vectorized ``predict_tree`` over the rows of X (n x d)."""
    out = np.empty(len(X), dtype=np.int64)
    stack: list[tuple[TreeNode, np.ndarray]] = [(tree, np.arange(len(X)))]
    while stack:
        node, idx = stack.pop()
        if isinstance(node, Leaf):
            out[idx] = node.label
            continue
        go_left = X[idx, node.feature] <= node.threshold
        stack.append((node.left, idx[go_left]))
        stack.append((node.right, idx[~go_left]))
    return out


def predict_batch(ensemble: Ensemble, X: np.ndarray) -> np.ndarray:
    """Vectorized majority-vote prediction over the rows of X."""
    X = np.asarray(X, dtype=np.float64)
    votes = np.zeros((len(X), ensemble.num_labels), dtype=np.int32)
    rows = np.arange(len(X))
    for tree in ensemble.trees:
        votes[rows, predict_tree_batch(tree, X)] += 1
    return np.argmax(votes, axis=1)  # argmax takes the smallest index on ties


def thresholds_per_feature(ensemble: Ensemble) -> dict[int, list[float]]:
    """Distinct thresholds appearing in internal nodes, ascending per feature."""
    acc: dict[int, set[float]] = {}
    stack: list[TreeNode] = list(ensemble.trees)
    while stack:
        node = stack.pop()
        if isinstance(node, Internal):
            acc.setdefault(node.feature, set()).add(node.threshold)
            stack.append(node.left)
            stack.append(node.right)
    return {f: sorted(vs) for f, vs in sorted(acc.items())}
