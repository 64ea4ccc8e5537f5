"""Temporal leaf matching: Hungarian assignment, leaf costs and timeline reconciliation.

Leaves detected on two days of the same plant are paired by a minimum-cost
assignment where the cost of a pair is the tip-to-tip plus branch-to-branch
distance. Days whose leaf count is implausible for the plant's age are
compared with up to three days on either side; a consensus of neighbours
with more leaves means a leaf is hidden (it is re-inserted as occluded), a
consensus with fewer means one detection is a spur (it is removed).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidInputError, ViewMismatchError
from .records import DELETED, INSERTED, AuditEntry, PlantDayRecord, PlantTimeline
from .skeleton.plant import Label, LeafCandidate

log = logging.getLogger(__name__)

RECONCILE_STAGE = "reconcile"


@dataclass(frozen=True)
class ReconcileParams:
    window: int = 3
    match_accept_threshold: float = 150.0
    leaf_rate_min: float = 2.0
    leaf_rate_max: float = 3.0
    tenth_leaf_cap: int = 10
    consensus_quorum: int = 4

    def __post_init__(self):
        if self.window < 1:
            raise InvalidInputError("window must be at least one day")
        if not 0 < self.leaf_rate_min <= self.leaf_rate_max:
            raise InvalidInputError("need 0 < leaf_rate_min <= leaf_rate_max")
        if not 0 < self.consensus_quorum <= 2 * self.window:
            raise InvalidInputError("consensus_quorum must lie in [1, 2 * window]")
        if self.match_accept_threshold < 0 or self.tenth_leaf_cap < 1:
            raise InvalidInputError("match_accept_threshold must be >= 0 and tenth_leaf_cap >= 1")


@dataclass(frozen=True)
class Matching:
    """Row -> column pairs of an assignment (sorted by row) and their total cost."""

    pairs: tuple[tuple[int, int], ...]
    score: float

    @property
    def assignment(self) -> dict[int, int]:
        return dict(self.pairs)


# --- Hungarian algorithm ------------------------------------------------------


def _check_costs(costs) -> np.ndarray:
    c = np.asarray(costs, dtype=float)
    if c.size == 0:
        return c.reshape(0, 0) if c.ndim != 2 else c
    if c.ndim != 2:
        raise InvalidInputError(f"cost matrix must be 2-D, got shape {c.shape}")
    if not np.isfinite(c).all() or (c < 0).any():
        raise InvalidInputError("costs must be finite and non-negative")
    return c


def _solve(c: np.ndarray) -> tuple[list[int], float]:
    """Minimum-cost assignment of every row of an n x m matrix (n <= m).

    Shortest augmenting paths with row/column potentials, O(n^2 m).
    Returns the column of each row and the optimal score.
    """
    n, m = c.shape
    INF = math.inf
    u = [0.0] * (n + 1)
    v = [0.0] * (m + 1)
    p = [0] * (m + 1)  # p[j]: row (1-based) matched to column j; column 0 is virtual
    way = [0] * (m + 1)
    rows = c.tolist()
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [INF] * (m + 1)
        used = [False] * (m + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            row = rows[i0 - 1]
            delta, j1 = INF, 0
            for j in range(1, m + 1):
                if used[j]:
                    continue
                cur = row[j - 1] - u[i0] - v[j]
                if cur < minv[j]:
                    minv[j], way[j] = cur, j0
                if minv[j] < delta:
                    delta, j1 = minv[j], j
            for j in range(m + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    col_of = [0] * n
    for j in range(1, m + 1):
        if p[j]:
            col_of[p[j] - 1] = j - 1
    return col_of, float(sum(rows[i][col_of[i]] for i in range(n)))


def _tolerance(c: np.ndarray) -> float:
    return 1e-9 * max(1.0, float(c.max()) * c.shape[0])


def _lexicographic_optimum(c: np.ndarray) -> tuple[list[int], float]:
    """Among all optimal assignments, the one with the lexicographically smallest column list."""
    n, m = c.shape
    _, best = _solve(c)
    tol = _tolerance(c)
    fixed: list[int] = []
    free_rows = list(range(n))
    free_cols = list(range(m))
    spent = 0.0
    for i in range(n):
        rest_rows = free_rows[1:]
        for j in free_cols:
            cols = [k for k in free_cols if k != j]
            if rest_rows:
                _, sub = _solve(c[np.ix_(rest_rows, cols)])
            else:
                sub = 0.0
            if spent + c[i, j] + sub <= best + tol:
                fixed.append(j)
                spent += c[i, j]
                free_cols = cols
                break
        free_rows = rest_rows
    return fixed, float(sum(c[i, j] for i, j in enumerate(fixed)))


def hungarian_min_cost(costs) -> Matching:
    """Minimum-score injective assignment between the rows and columns of a cost matrix.

    Rectangular matrices are allowed; the smaller side is matched completely.
    Among equally good assignments, the one giving each index of the smaller
    side, in order, the smallest possible partner is returned.
    """
    c = _check_costs(costs)
    if c.size == 0:
        return Matching((), 0.0)
    if c.shape[0] > c.shape[1]:
        cols, score = _lexicographic_optimum(c.T)
        pairs = sorted((r, j) for j, r in enumerate(cols))
        return Matching(tuple(pairs), score)
    cols, score = _lexicographic_optimum(c)
    return Matching(tuple(enumerate(cols)), score)


# --- leaves -------------------------------------------------------------------


def leaf_cost(a: LeafCandidate, b: LeafCandidate) -> float:
    """Tip-to-tip plus branch-to-branch Euclidean distance."""
    if not (a.has_position and b.has_position):
        raise InvalidInputError("cannot compare a leaf without a position")
    return math.dist(a.tip, b.tip) + math.dist(a.branch, b.branch)


def expected_leaf_range(days_since_emergence: int, p: ReconcileParams | None = None) -> tuple[int, int]:
    """Plausible leaf count range for a plant ``d`` days after emergence.

    One leaf at emergence and one more every ``leaf_rate_max`` (slowest) to
    ``leaf_rate_min`` (fastest) days, capped at the tenth-leaf stage.
    """
    p = p or ReconcileParams()
    d = int(days_since_emergence)
    if d < 1:
        raise InvalidInputError(f"days since emergence must be >= 1, got {d}")
    lo = 1 + math.floor((d - 1) / p.leaf_rate_max)
    hi = 1 + math.ceil((d - 1) / p.leaf_rate_min)
    return min(lo, p.tenth_leaf_cap), min(hi, p.tenth_leaf_cap)


@dataclass(frozen=True)
class LeafMatch:
    pairs: tuple[tuple[int, int, float], ...]  # (leaf index on day i, on day j, cost)
    unmatched_i: tuple[int, ...]
    unmatched_j: tuple[int, ...]

    def to_dict(self) -> dict:
        return {"pairs": [list(p) for p in self.pairs],
                "unmatched_i": list(self.unmatched_i), "unmatched_j": list(self.unmatched_j)}


def match_leaf_lists(leaves_i, leaves_j, threshold: float) -> LeafMatch:
    """Match two leaf lists; pairs costlier than ``threshold`` count as unmatched.

    Leaves without a position never take part and are reported unmatched.
    """
    idx_i = [k for k, c in enumerate(leaves_i) if c.has_position]
    idx_j = [k for k, c in enumerate(leaves_j) if c.has_position]
    pairs = []
    if idx_i and idx_j:
        costs = np.array([[leaf_cost(leaves_i[a], leaves_j[b]) for b in idx_j] for a in idx_i])
        m = hungarian_min_cost(costs)
        for r, k in m.pairs:
            if costs[r, k] <= threshold:
                pairs.append((idx_i[r], idx_j[k], float(costs[r, k])))
    used_i = {a for a, _, _ in pairs}
    used_j = {b for _, b, _ in pairs}
    return LeafMatch(
        tuple(pairs),
        tuple(k for k in range(len(leaves_i)) if k not in used_i),
        tuple(k for k in range(len(leaves_j)) if k not in used_j),
    )


def match_leaves(day_i: PlantDayRecord, day_j: PlantDayRecord, p: ReconcileParams | None = None) -> LeafMatch:
    """Match the leaves of two same-view plant days."""
    p = p or ReconcileParams()
    if day_i.view != day_j.view:
        raise ViewMismatchError(f"day {day_i.day} ({day_i.view}) vs day {day_j.day} ({day_j.view})")
    return match_leaf_lists(day_i.leaves, day_j.leaves, p.match_accept_threshold)


# --- reconciliation -----------------------------------------------------------


def _min_cost_to(leaf: LeafCandidate, others) -> float:
    costs = [leaf_cost(leaf, o) for o in others if o.has_position]
    return min(costs) if costs else math.inf


def _pick_outlier(candidates: list[int], leaves, others) -> int:
    """The unmatched leaf farthest (in leaf cost) from every leaf of the other day."""
    return max(candidates, key=lambda k: (_min_cost_to(leaves[k], others), -k))


def reconcile_timeline(tl: PlantTimeline, p: ReconcileParams | None = None) -> PlantTimeline:
    """One reconciliation pass over a plant's timeline.

    Decisions are taken on the counts the timeline had on entry, so a
    correction on one day never influences the verdict on another.
    """
    p = p or ReconcileParams()
    records = list(tl.records)
    if len(records) < 2:
        return tl
    original = list(records)
    counts = [r.count for r in original]
    out = list(records)
    for k, rec in enumerate(original):
        if not rec.emerged:
            continue
        lo, hi = expected_leaf_range(rec.days_since_emergence, p)
        if lo <= counts[k] <= hi:
            continue
        nbrs = [j for j, r in enumerate(original)
                if j != k and r.emerged and abs(r.day - rec.day) <= p.window]
        if not nbrs:
            continue
        quorum = math.ceil(p.consensus_quorum * len(nbrs) / (2 * p.window))
        more = [j for j in nbrs if counts[j] > counts[k]]
        fewer = [j for j in nbrs if counts[j] < counts[k]]
        if len(more) >= quorum:
            out[k] = _recover_missing(rec, [original[j] for j in more], p)
        elif len(fewer) >= quorum:
            out[k] = _remove_spur(rec, [original[j] for j in fewer], [original[j] for j in nbrs], p)
    return replace(tl, records=tuple(out))


def _nearest_same_view(rec: PlantDayRecord, pool: list[PlantDayRecord]) -> PlantDayRecord | None:
    same = [r for r in pool if r.view == rec.view and rec.view is not None]
    if not same:
        return None
    return min(same, key=lambda r: (abs(r.day - rec.day), r.day))


def _recover_missing(rec: PlantDayRecord, richer, p: ReconcileParams) -> PlantDayRecord:
    nb = _nearest_same_view(rec, richer)
    if nb is not None:
        m = match_leaves(rec, nb, p)
        lost = [j for j in m.unmatched_j if nb.leaves[j].has_position]
        if lost:
            j = _pick_outlier(lost, nb.leaves, rec.leaves)
            src = nb.leaves[j]
            new = LeafCandidate.occluded(src.branch, src.tip)
            log.info("plant %s day %d: recovered occluded leaf from day %d",
                     rec.plant_id, rec.day, nb.day)
            return rec.with_leaves(rec.leaves + (new,),
                                   [AuditEntry(RECONCILE_STAGE, INSERTED, new.tip, new.branch)])
    log.info("plant %s day %d: count-only recovery of an occluded leaf", rec.plant_id, rec.day)
    return rec.with_leaves(rec.leaves + (LeafCandidate.occluded(),),
                           [AuditEntry(RECONCILE_STAGE, INSERTED, None, None)])


def _remove_spur(rec: PlantDayRecord, poorer, window, p: ReconcileParams) -> PlantDayRecord:
    """Drop the detection that the neighbouring days least agree with.

    Candidates are the leaves left unmatched against the nearest same-view
    day with fewer leaves. A leaf that has just appeared is unmatched only
    against earlier days, while a spur is unmatched against all of them, so
    the candidate unmatched on the most same-view days in the window wins.
    """
    detected = [k for k, c in enumerate(rec.leaves) if c.label is Label.LEAF]
    if not detected:
        return rec
    nb = _nearest_same_view(rec, poorer)
    k = None
    if nb is not None:
        m = match_leaves(rec, nb, p)
        extra = [i for i in m.unmatched_i if i in detected]
        if extra:
            votes = dict.fromkeys(extra, 0)
            for other in window:
                if other.view != rec.view:
                    continue
                for i in match_leaves(rec, other, p).unmatched_i:
                    if i in votes:
                        votes[i] += 1
            k = max(extra, key=lambda i: (votes[i], _min_cost_to(rec.leaves[i], nb.leaves), -i))
    if k is None:
        k = min(detected, key=lambda i: (rec.leaves[i].length, i))
    spur = rec.leaves[k].relabel(Label.SPUR)
    log.info("plant %s day %d: removed spur at %s", rec.plant_id, rec.day, spur.tip)
    keep = rec.leaves[:k] + rec.leaves[k + 1:]
    return rec.with_leaves(keep, [AuditEntry(RECONCILE_STAGE, DELETED, spur.tip, spur.branch)], [spur])
