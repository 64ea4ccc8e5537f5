import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maizeleaf.errors import EmptyInputError
from maizeleaf.hull import View, convex_hull, hull_area, hull_of_points, polygon_area, select_view
from shapes import stick_plant, thick


def brute_force_hull_vertices(points):
    """A point is a vertex iff it lies outside every (possibly degenerate) triangle of the others."""
    pts = np.array(points, dtype=np.int64)
    keep = set()
    for i, p in enumerate(pts):
        others = np.delete(pts, i, axis=0)
        if len(others) == 0:
            keep.add(tuple(p))
            continue
        tri = np.array(list(itertools.combinations_with_replacement(range(len(others)), 3)))
        a, b, c = others[tri[:, 0]], others[tri[:, 1]], others[tri[:, 2]]

        def cross(o, u, v):
            return (u[:, 0] - o[:, 0]) * (v[1] - o[:, 1]) - (u[:, 1] - o[:, 1]) * (v[0] - o[:, 0])

        d1, d2, d3 = cross(a, b, p), cross(b, c, p), cross(c, a, p)
        neg = (d1 < 0) | (d2 < 0) | (d3 < 0)
        pos = (d1 > 0) | (d2 > 0) | (d3 > 0)
        inside_nondegenerate = ~(neg & pos)
        # degenerate triangles: inside means on a segment between two of the points
        area = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
        on_segment = np.zeros(len(tri), bool)
        for u, v in ((a, b), (b, c), (a, c)):
            col = ((v[:, 0] - u[:, 0]) * (p[1] - u[:, 1]) - (v[:, 1] - u[:, 1]) * (p[0] - u[:, 0])) == 0
            within = ((np.minimum(u[:, 0], v[:, 0]) <= p[0]) & (p[0] <= np.maximum(u[:, 0], v[:, 0]))
                      & (np.minimum(u[:, 1], v[:, 1]) <= p[1]) & (p[1] <= np.maximum(u[:, 1], v[:, 1])))
            on_segment |= col & within
        inside = np.where(area != 0, inside_nondegenerate, on_segment)
        if not inside.any():
            keep.add(tuple(int(v) for v in p))
    return keep


def mask_from(points, shape=(30, 30)):
    m = np.zeros(shape, bool)
    for p in points:
        m[p] = True
    return m


def contains(hull, p):
    if len(hull) < 3:
        return True
    for a, b in zip(hull, hull[1:] + hull[:1]):
        if (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) < 0:
            return False
    return True


def test_square_with_center():
    m = mask_from([(0, 0), (0, 2), (2, 0), (2, 2), (1, 1)])
    assert set(convex_hull(m)) == {(0, 0), (0, 2), (2, 0), (2, 2)}


def test_collinear_gives_segment():
    assert convex_hull(mask_from([(3, 1), (3, 2), (3, 3)])) == [(3, 1), (3, 3)]


def test_single_pixel_and_empty():
    assert convex_hull(mask_from([(4, 4)])) == [(4, 4)]
    with pytest.raises(EmptyInputError):
        convex_hull(np.zeros((3, 3), bool))


@pytest.mark.parametrize("seed", range(10))
def test_random_mask_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    flat = rng.choice(30 * 30, size=50, replace=False)
    pts = [divmod(int(k), 30) for k in flat]
    assert set(convex_hull(mask_from(pts))) == brute_force_hull_vertices(pts)


def test_polygon_area_examples():
    assert polygon_area([(0, 0), (0, 1), (1, 1), (1, 0)]) == 1.0
    assert polygon_area([(0, 0), (5, 5)]) == 0.0
    assert polygon_area([(0, 0), (0, 4), (3, 0)]) == 6.0


point_sets = st.lists(st.tuples(st.integers(0, 25), st.integers(0, 25)), min_size=1, max_size=40)


@settings(max_examples=80, deadline=None)
@given(point_sets)
def test_hull_is_ccw_contains_all_and_idempotent(pts):
    hull = hull_of_points(pts)
    assert all(contains(hull, p) for p in pts)
    assert hull_of_points(hull) == hull
    if len(hull) >= 3:
        for a, b, c in zip(hull, hull[1:] + hull[:1], hull[2:] + hull[:2]):
            assert (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]) > 0


@settings(max_examples=50, deadline=None)
@given(point_sets)
def test_mask_hull_equals_point_hull(pts):
    assert convex_hull(mask_from(pts)) == hull_of_points(pts)


def test_select_view_larger_wins_and_tie_goes_to_view0():
    small = np.zeros((20, 20), bool); small[5:13, 5:15] = True  # 7 x 9 hull = 63
    big = np.zeros((20, 20), bool); big[2:18, 2:18] = True
    assert select_view(big, small).view is View.VIEW0
    assert select_view(small, big).view is View.VIEW90
    c = select_view(small, small.copy())
    assert c.view is View.VIEW0 and c.area0 == c.area90


def test_select_view_one_empty():
    m = np.zeros((5, 5), bool); m[1:3, 1:3] = True
    e = np.zeros((5, 5), bool)
    assert select_view(e, m).view is View.VIEW90
    assert select_view(m, e).view is View.VIEW0
    with pytest.raises(EmptyInputError):
        select_view(e, e)


def test_wider_side_view_selected():
    # Later in the season the leaves may spread more in the 90 degree view.
    narrow = thick(stick_plant(leaves=((150, 1), (120, -1), (90, 1), (60, -1))), 2)
    wide = np.zeros_like(narrow)
    sk = stick_plant(leaves=((150, 1), (120, -1), (90, 1), (60, -1)))
    xs, ys = np.nonzero(sk)
    wide[xs, np.clip(60 + (ys - 60) * 3 // 2, 0, 119)] = True
    wide = thick(wide, 2)
    assert hull_area(wide) > hull_area(narrow)
    assert select_view(narrow, wide).view is View.VIEW90


@settings(max_examples=40, deadline=None)
@given(point_sets, point_sets)
def test_select_view_swap_symmetry(a, b):
    ma, mb = mask_from(a), mask_from(b)
    c1, c2 = select_view(ma, mb), select_view(mb, ma)
    if c1.area0 != c1.area90:
        assert c1.view != c2.view
