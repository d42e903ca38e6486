import math

import pytest
from hypothesis import given, strategies as st

from treefair.geometry import (
    FULL_INTERVAL,
    FULL_SPACE,
    HyperRectangle,
    Interval,
    hr_contains_point,
    hr_intersects,
    hr_subset,
    interval_intersect,
)

H1 = HyperRectangle({0: Interval(1, 5), 1: Interval(3, 8)})
H2 = HyperRectangle({0: Interval(4, 7), 1: Interval(2, 6)})


class TestInterval:
    def test_empty_interval_rejected(self):
        with pytest.raises(ValueError):
            Interval(5, 5)
        with pytest.raises(ValueError):
            Interval(6, 5)

    def test_membership_is_left_open_right_closed(self):
        iv = Interval(1, 5)
        assert not iv.contains(1)
        assert iv.contains(1.0001)
        assert iv.contains(5)
        assert not iv.contains(5.0001)

    def test_intersect_overlapping(self):
        assert Interval(1, 5).intersect(Interval(4, 7)) == Interval(4, 5)

    def test_intersect_disjoint_is_none(self):
        # the x0 side of the first worked-example fairness condition
        assert Interval(-math.inf, 1).intersect(Interval(4, 7)) is None
        # touching at the boundary: (1,5] and (5,9] share no point
        assert Interval(1, 5).intersect(Interval(5, 9)) is None

    def test_full_interval_is_identity(self):
        a = Interval(2.5, 17)
        assert interval_intersect(a, FULL_INTERVAL) == a
        assert interval_intersect(FULL_INTERVAL, a) == a

    def test_json_round_trip_uses_inf_strings(self):
        iv = Interval(-math.inf, 5)
        doc = iv.to_json()
        assert doc == {"lo": "-inf", "hi": 5}
        assert Interval.from_json(doc) == iv
        assert Interval.from_json({"lo": 1, "hi": "+inf"}) == Interval(1, math.inf)


finite = st.floats(min_value=-100, max_value=100, allow_nan=False)


@st.composite
def intervals(draw):
    lo = draw(st.one_of(st.just(-math.inf), finite))
    hi = draw(st.one_of(st.just(math.inf), finite))
    if not lo < hi:
        lo, hi = hi, lo
    if lo == hi:
        hi = lo + 1
    return Interval(lo, hi)


@given(intervals(), intervals())
def test_intersect_commutative(a, b):
    assert a.intersect(b) == b.intersect(a)


@given(intervals(), intervals(), intervals())
def test_intersect_associative_where_defined(a, b, c):
    ab = a.intersect(b)
    bc = b.intersect(c)
    left = ab.intersect(c) if ab else None
    right = a.intersect(bc) if bc else None
    if left is not None and right is not None:
        assert left == right


@given(intervals(), intervals())
def test_intersection_members_belong_to_both(a, b):
    got = a.intersect(b)
    if got is not None:
        mid = got.midpoint()
        assert got.contains(mid)
        assert a.contains(mid) and b.contains(mid)


class TestHyperRectangle:
    def test_worked_example_boxes_overlap(self):
        assert hr_intersects(H1, H2)
        assert hr_intersects(H2, H1)

    def test_condition_region_overlaps_second_box(self):
        cond = HyperRectangle({0: Interval(5, math.inf), 1: Interval(-math.inf, 3)})
        assert hr_intersects(cond, H2)

    def test_disjoint_region(self):
        cond = HyperRectangle({0: Interval(-math.inf, 1)})
        assert not hr_intersects(cond, H1)

    def test_subset_conjunction_shrinks(self):
        small = HyperRectangle({0: Interval(5, math.inf), 1: Interval(6, math.inf)})
        big = HyperRectangle({0: Interval(5, math.inf)})
        assert hr_subset(small, big)
        assert not hr_subset(big, small)

    def test_subset_wrong_bound(self):
        a = HyperRectangle({0: Interval(5, math.inf), 1: Interval(6, math.inf)})
        b = HyperRectangle({0: Interval(7, math.inf)})
        assert not hr_subset(a, b)

    def test_everything_subset_of_full_space(self):
        assert hr_subset(H1, FULL_SPACE)
        assert hr_subset(FULL_SPACE, FULL_SPACE)

    def test_contains_point_boundaries(self):
        assert hr_contains_point(H1, [5, 8])  # right ends closed
        assert not hr_contains_point(H1, [1, 4])  # left ends open
        assert hr_contains_point(FULL_SPACE, [1e9, -1e9])

    def test_intersect_returns_combined_box(self):
        both = H1.intersect(H2)
        assert both is not None
        assert both.interval(0) == Interval(4, 5)
        assert both.interval(1) == Interval(3, 6)
        assert H1.intersect(HyperRectangle({0: Interval(-math.inf, 1)})) is None

    def test_json_round_trip(self):
        rect = HyperRectangle({0: Interval(1, 5), 3: Interval(-math.inf, 2)}, id=7)
        doc = rect.to_json()
        assert doc["id"] == 7
        assert doc["intervals"]["3"] == {"lo": "-inf", "hi": 2}
        back = HyperRectangle.from_json(doc)
        assert back.same_region(rect) and back.id == 7


@st.composite
def rectangles(draw, max_features=4):
    n = draw(st.integers(0, max_features))
    feats = draw(st.permutations(range(max_features)))[:n]
    return HyperRectangle({f: draw(intervals()) for f in feats})


@given(rectangles(), rectangles())
def test_hr_intersects_iff_witness_point_exists(a, b):
    if a.intersects(b):
        both = a.intersect(b)
        witness = [0.0] * 4
        for f, iv in both.intervals.items():
            witness[f] = iv.midpoint()
        assert a.contains_point(witness) and b.contains_point(witness)
    else:
        assert a.intersect(b) is None


@given(rectangles(), rectangles())
def test_mutual_subset_means_equal_regions(a, b):
    if hr_subset(a, b) and hr_subset(b, a):
        assert a.same_region(b)
