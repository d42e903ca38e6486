import pytest

from treefair.geometry import HyperRectangle, Interval
from treefair.model import Ensemble, Feature, FeatureMetadata, Internal, Leaf
from treefair.stability import UnstableSet

# Running example: a depth-2 tree over two numeric features that splits on
# x0 <= 8 and then on x1 (<= 6 on the left, <= 7 on the right), predicting
# "+1" (label 0) in the low-x1 leaves and "-1" (label 1) in the high-x1 ones.


def _example_metadata(d: int = 2) -> FeatureMetadata:
    return FeatureMetadata(tuple(Feature(i, f"x{i}") for i in range(d)))


@pytest.fixture
def example_tree() -> Internal:
    return Internal(
        0,
        8.0,
        Internal(1, 6.0, Leaf(0), Leaf(1)),
        Internal(1, 7.0, Leaf(0), Leaf(1)),
    )


@pytest.fixture
def example_ensemble(example_tree) -> Ensemble:
    return Ensemble((example_tree,), ("+1", "-1"), _example_metadata())


@pytest.fixture
def example_model_doc() -> dict:
    return {
        "num_features": 2,
        "labels": ["+1", "-1"],
        "features": [
            {"id": 0, "name": "x0", "kind": "numeric", "group": None},
            {"id": 1, "name": "x1", "kind": "numeric", "group": None},
        ],
        "trees": [
            {
                "feature": 0,
                "threshold": 8,
                "left": {"feature": 1, "threshold": 6, "left": {"leaf": 0}, "right": {"leaf": 1}},
                "right": {"feature": 1, "threshold": 7, "left": {"leaf": 0}, "right": {"leaf": 1}},
            }
        ],
    }


@pytest.fixture
def two_rectangle_unstable() -> UnstableSet:
    """The two-box worked example: H0 = (1,5] x (3,8], H1 = (4,7] x (2,6]."""
    rects = [
        HyperRectangle({0: Interval(1, 5), 1: Interval(3, 8)}),
        HyperRectangle({0: Interval(4, 7), 1: Interval(2, 6)}),
    ]
    return UnstableSet.from_hyperrectangles(rects, 2)
