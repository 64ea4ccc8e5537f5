"""Convex hulls of plant silhouettes and per-day view selection."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import EmptyInputError
from .raster import check_mask

Point = tuple[int, int]


class View(str, Enum):
    VIEW0 = "view0"
    VIEW90 = "view90"

    @property
    def degrees(self) -> int:
        return 0 if self is View.VIEW0 else 90

    @classmethod
    def from_degrees(cls, degrees: int) -> "View":
        return {0: cls.VIEW0, 90: cls.VIEW90}[int(degrees)]


@dataclass(frozen=True)
class ViewChoice:
    view: View
    area0: float
    area90: float


def _cross(o, a, b) -> int:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def hull_of_points(points) -> list[Point]:
    """Andrew's monotone chain. Returns the hull vertices counter-clockwise.

    Collinear points are dropped, so a collinear set yields its two extreme
    points and a single point yields itself.
    """
    pts = sorted({(int(p[0]), int(p[1])) for p in points})
    if len(pts) <= 2:
        return pts

    lower: list[Point] = []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[Point] = []
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    return hull


def convex_hull(mask) -> list[Point]:
    """Convex hull of the foreground pixel centers of a mask."""
    mask = check_mask(mask)
    xs, ys = np.nonzero(mask)
    if xs.size == 0:
        raise EmptyInputError("convex hull of an empty mask")
    # Only the extreme pixel of each row can be a hull vertex.
    rows = {}
    for x, y in zip(xs.tolist(), ys.tolist()):
        lo, hi = rows.get(x, (y, y))
        rows[x] = (min(lo, y), max(hi, y))
    candidates = [(x, y) for x, (lo, hi) in rows.items() for y in {lo, hi}]
    return hull_of_points(candidates)


def polygon_area(polygon) -> float:
    """Shoelace area; fewer than three vertices gives 0."""
    pts = list(polygon)
    if len(pts) < 3:
        return 0.0
    s = 0
    for (x0, y0), (x1, y1) in zip(pts, pts[1:] + pts[:1]):
        s += x0 * y1 - x1 * y0
    return abs(s) / 2.0


def hull_area(mask) -> float:
    mask = check_mask(mask)
    if not mask.any():
        return 0.0
    return polygon_area(convex_hull(mask))


def select_view(mask0, mask90) -> ViewChoice:
    """Pick the view whose silhouette has the larger convex hull (ties go to view 0)."""
    m0, m90 = check_mask(mask0), check_mask(mask90)
    empty0, empty90 = not m0.any(), not m90.any()
    if empty0 and empty90:
        raise EmptyInputError("both views are empty")
    a0 = 0.0 if empty0 else hull_area(m0)
    a90 = 0.0 if empty90 else hull_area(m90)
    if empty0:
        return ViewChoice(View.VIEW90, a0, a90)
    if empty90:
        return ViewChoice(View.VIEW0, a0, a90)
    return ViewChoice(View.VIEW90 if a90 > a0 else View.VIEW0, a0, a90)
