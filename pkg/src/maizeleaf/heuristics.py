"""Maize-development rules that remove spurs left over after skeleton pruning.

Each rule inspects the plant structure (stem and leaf candidates, see
:mod:`maizeleaf.skeleton.plant`) and deletes whole leaf candidates or end
branches; the stem is never touched. Rules are applied in a fixed order by
:func:`apply_heuristics`, which also returns an audit log naming the rule
behind every deletion.

Positions follow the raster convention: ``x`` grows downwards, so "lower"
means larger ``x`` and the bottom row is ``x = height - 1``.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import ndimage

from .errors import InvalidInputError
from .raster import EIGHT_CONNECTED, check_mask
from .skeleton.graph import SkeletonGraph
from .skeleton.plant import PlantStructure, identify_stem_and_leaves

log = logging.getLogger(__name__)

ONE_PIXEL_SPUR = "one_pixel_spur"
ROOT_BRANCH_COUNT = "root_branch_count"
CLOSE_BRANCH_PAIR = "close_branch_pair"
TUB_EDGE = "tub_edge"
BOUNDARY_ROOT = "boundary_root"
TRIPLE_BRANCH = "triple_branch"

RULE_ORDER = (ONE_PIXEL_SPUR, ROOT_BRANCH_COUNT, CLOSE_BRANCH_PAIR, TUB_EDGE, BOUNDARY_ROOT, TRIPLE_BRANCH)

# Tolerance between a skeleton end point and the silhouette contour.
BOUNDARY_TOLERANCE = 2.0


class TubRuleDirection(str, enum.Enum):
    AS_WRITTEN = "as_written"
    AS_RATIONALIZED = "as_rationalized"


@dataclass(frozen=True)
class HeuristicParams:
    upper_region_cutoff: int = 1700
    min_branch_gap: float = 10.0
    max_root_branch_points: int = 4
    early_day_limit: int = 10
    boundary_rule_start_day: int = 15
    leaf_stem_angle_threshold: float = 30.0
    tub_rule_direction: TubRuleDirection = TubRuleDirection.AS_WRITTEN
    triple_branch_length_ratio: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "tub_rule_direction", TubRuleDirection(self.tub_rule_direction))
        positive = ("upper_region_cutoff", "min_branch_gap", "max_root_branch_points",
                    "early_day_limit", "boundary_rule_start_day", "triple_branch_length_ratio")
        for name in positive:
            if getattr(self, name) <= 0:
                raise InvalidInputError(f"{name} must be positive")
        if not 0.0 < self.leaf_stem_angle_threshold < 90.0:
            raise InvalidInputError("leaf_stem_angle_threshold must lie in (0, 90) degrees")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["tub_rule_direction"] = self.tub_rule_direction.value
        return d


@dataclass(frozen=True)
class Deletion:
    rule: str
    tip: tuple[int, int] | None
    branch: tuple[int, int] | None

    def to_dict(self) -> dict:
        return {
            "rule": self.rule,
            "deleted_edge_tip": None if self.tip is None else list(self.tip),
            "deleted_edge_branch": None if self.branch is None else list(self.branch),
        }


def _structure(g: SkeletonGraph) -> PlantStructure | None:
    if not g.endpoints:
        return None
    return identify_stem_and_leaves(g)


def _delete_candidates(g: SkeletonGraph, s: PlantStructure, indices, rule: str):
    pixels = set()
    out = []
    for i in indices:
        pixels |= s.owned_pixels[i]
        c = s.candidates[i]
        out.append(Deletion(rule, c.tip, c.branch))
    return g.without(pixels), out


# --- individual rules ---------------------------------------------------------


def _one_pixel_spurs(g: SkeletonGraph, p: HeuristicParams):
    deleted = []
    limit = g.height - p.upper_region_cutoff
    while True:
        doomed = []
        for _, e in g.endpoint_edges():
            base = g.base_of(e)
            if e.length == 1 and base.position[0] < limit:
                doomed.append((e, g.tip_of(e).position, base.position))
        if not doomed:
            return g, deleted
        pixels = set()
        for e, tip, branch in doomed:
            pixels.update(e.chain)
            deleted.append(Deletion(ONE_PIXEL_SPUR, tip, branch))
        g = g.without(pixels)


def _root_branch_count(g: SkeletonGraph, day: int, p: HeuristicParams):
    if day > p.early_day_limit:
        return g, []
    s = _structure(g)
    if s is None:
        return g, []
    points = s.branch_points
    if len(points) <= p.max_root_branch_points:
        return g, []
    below = set(points[p.max_root_branch_points:])
    doomed = [i for i, c in enumerate(s.candidates) if c.branch in below]
    return _delete_candidates(g, s, doomed, ROOT_BRANCH_COUNT)


def _close_branch_pair(g: SkeletonGraph, day: int, p: HeuristicParams):
    if day > p.early_day_limit:
        return g, []
    deleted = []
    while True:
        s = _structure(g)
        if s is None:
            return g, deleted
        points = s.branch_points
        if len(points) < 2 or math.dist(points[-1], points[-2]) >= p.min_branch_gap:
            return g, deleted
        g, more = _delete_candidates(g, s, s.candidates_at(points[-1]), CLOSE_BRANCH_PAIR)
        deleted += more


def _lowest(points):
    return max(points, key=lambda q: (q[0], -q[1]))


def _tub_edge(g: SkeletonGraph, p: HeuristicParams):
    branches = [n.position for n in g.branches]
    ends = g.endpoints
    if not branches or not ends:
        return g, []
    b = _lowest(branches)
    e_node = max(ends, key=lambda n: (n.position[0], -n.position[1]))
    e = e_node.position
    dx, dy = abs(b[0] - e[0]), abs(b[1] - e[1])
    if p.tub_rule_direction is TubRuleDirection.AS_WRITTEN:
        delete = dx > dy
    else:
        delete = dy > dx
    if not delete:
        return g, []
    s = _structure(g)
    for i, c in enumerate(s.candidates):
        if c.tip == e:
            return _delete_candidates(g, s, [i], TUB_EDGE)
    edge = g.edges[g.incident[e_node.id][0]]
    other = edge.other(e_node.id)
    branch = g.node(other).position if other is not None else None
    return g.without(edge.chain), [Deletion(TUB_EDGE, e, branch)]


def contour(mask) -> np.ndarray:
    """Foreground pixels 8-adjacent to background (or to the image border)."""
    m = check_mask(mask)
    return m & ~ndimage.binary_erosion(m, structure=EIGHT_CONNECTED, border_value=0)


def near_contour(mask, point, tolerance: float = BOUNDARY_TOLERANCE) -> bool:
    c = contour(mask)
    if not c.any():
        return False
    dist = ndimage.distance_transform_edt(~c)
    return bool(dist[point] <= tolerance)


def leaf_stem_angle(s: PlantStructure, index: int) -> float:
    """Angle in degrees between a candidate's branch->tip vector and the stem's upward direction."""
    c = s.candidates[index]
    vx, vy = c.tip[0] - c.branch[0], c.tip[1] - c.branch[1]
    norm = math.hypot(vx, vy)
    if norm == 0:
        return 0.0
    ux, uy = s.upward_direction(c.branch)
    cos = max(-1.0, min(1.0, (vx * ux + vy * uy) / norm))
    return math.degrees(math.acos(cos))


def _boundary_root(g: SkeletonGraph, mask, day: int, p: HeuristicParams):
    if day < p.boundary_rule_start_day:
        return g, []
    mask = check_mask(mask)
    if mask.shape != g.shape:
        raise InvalidInputError(f"mask {mask.shape} and skeleton {g.shape} differ in shape")
    s = _structure(g)
    if s is None or not s.candidates:
        return g, []
    i = max(range(len(s.candidates)),
            key=lambda k: (s.candidates[k].branch[0], s.candidates[k].tip[0], -s.candidates[k].tip[1]))
    c = s.candidates[i]
    in_root_region = c.tip[0] >= g.height - p.upper_region_cutoff
    if in_root_region and near_contour(mask, c.tip) and leaf_stem_angle(s, i) < p.leaf_stem_angle_threshold:
        return _delete_candidates(g, s, [i], BOUNDARY_ROOT)
    return g, []


def _triple_branch(g: SkeletonGraph, p: HeuristicParams):
    s = _structure(g)
    if s is None or not s.candidates:
        return g, []
    branch_positions = {n.position for n in g.branches}
    stem_branches = [k for k, q in enumerate(s.stem_nodes) if q in branch_positions]
    if not stem_branches:
        return g, []
    k = stem_branches[0]  # stem nodes run upwards, so the first is the lowest
    node = s.stem_nodes[k]
    cands = s.candidates_at(node)
    # (|dy|, length, lower end x, candidate index or None for the stem)
    segments = [(abs(s.candidates[i].tip[1] - node[1]), s.candidates[i].length, s.candidates[i].tip[0], i)
                for i in cands]
    if k + 1 < len(s.stem_nodes):
        far = s.stem_nodes[k + 1]
        segments.append((abs(far[1] - node[1]), len(s.stem_segments[k]) + 1, far[0], None))
    if len(segments) != 3:
        return g, []
    stem_seg = min(segments, key=lambda t: (t[0], t[3] is not None))
    a, b = [t for t in segments if t is not stem_seg]
    ratio = p.triple_branch_length_ratio
    spur = None
    if a[1] < ratio * b[1] and a[2] > b[2]:
        spur = a
    elif b[1] < ratio * a[1] and b[2] > a[2]:
        spur = b
    if spur is None or spur[3] is None:
        return g, []
    return _delete_candidates(g, s, [spur[3]], TRIPLE_BRANCH)


# --- public API ---------------------------------------------------------------


def prune_one_pixel_spurs(g: SkeletonGraph, p: HeuristicParams | None = None) -> SkeletonGraph:
    """Remove 1-pixel end branches whose branch point is above the root region."""
    return _one_pixel_spurs(g, p or HeuristicParams())[0]


def prune_root_branch_count(g: SkeletonGraph, day: int, p: HeuristicParams | None = None) -> SkeletonGraph:
    """Early days: drop leaf candidates attached below the fourth branch point from the top."""
    return _root_branch_count(g, day, p or HeuristicParams())[0]


def prune_close_branch_pair(g: SkeletonGraph, day: int, p: HeuristicParams | None = None) -> SkeletonGraph:
    """Early days: drop the lowest candidates while the two lowest branch points crowd each other."""
    return _close_branch_pair(g, day, p or HeuristicParams())[0]


def prune_tub_edge(g: SkeletonGraph, p: HeuristicParams | None = None) -> SkeletonGraph:
    """Compare the lowest end point with the lowest branch point and drop the end branch if the offset calls for it."""
    return _tub_edge(g, p or HeuristicParams())[0]


def prune_boundary_root(g: SkeletonGraph, mask, day: int, p: HeuristicParams | None = None) -> SkeletonGraph:
    """Late days: drop the lowest candidate if it hugs the silhouette boundary close to the stem direction."""
    return _boundary_root(g, mask, day, p or HeuristicParams())[0]


def resolve_triple_branch(g: SkeletonGraph, p: HeuristicParams | None = None) -> SkeletonGraph:
    """At a three-way lowest branch point, drop the short, low segment as a spur."""
    return _triple_branch(g, p or HeuristicParams())[0]


def apply_heuristics_staged(g: SkeletonGraph, mask, day: int, p: HeuristicParams | None = None):
    """Yield ``(rule, graph after the rule, deletions)`` for each rule in order."""
    p = p or HeuristicParams()
    if int(day) < 1:
        raise InvalidInputError(f"day must be >= 1, got {day}")
    steps = (
        (ONE_PIXEL_SPUR, lambda g: _one_pixel_spurs(g, p)),
        (ROOT_BRANCH_COUNT, lambda g: _root_branch_count(g, day, p)),
        (CLOSE_BRANCH_PAIR, lambda g: _close_branch_pair(g, day, p)),
        (TUB_EDGE, lambda g: _tub_edge(g, p)),
        (BOUNDARY_ROOT, lambda g: _boundary_root(g, mask, day, p)),
        (TRIPLE_BRANCH, lambda g: _triple_branch(g, p)),
    )
    for rule, step in steps:
        g, deleted = step(g)
        for d in deleted:
            log.debug("%s removed branch at %s (tip %s)", d.rule, d.branch, d.tip)
        yield rule, g, deleted


def apply_heuristics(g: SkeletonGraph, mask, day: int, p: HeuristicParams | None = None):
    """Apply all rules in order; return the pruned graph and the deletion audit log."""
    audit: list[Deletion] = []
    for _, g, deleted in apply_heuristics_staged(g, mask, day, p):
        audit += deleted
    return g, audit
