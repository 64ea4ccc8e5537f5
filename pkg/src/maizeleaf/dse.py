"""Discrete skeleton evolution: iterative removal of low-relevance end branches.

The relevance of an end branch is the share of the skeleton it accounts
for, ``a_e / a_s``, where ``a_e`` is the pixel count of the branch chain
and ``a_s`` the pixel count of the whole skeleton. The least relevant end
branch is removed while its weight is below the threshold; the skeleton
area and the graph are recomputed after every single removal.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from .errors import InvalidInputError
from .skeleton.graph import SkeletonGraph

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DseParams:
    weight_threshold: float = 0.005

    def __post_init__(self):
        if not 0.0 <= self.weight_threshold < 1.0:
            raise InvalidInputError(f"weight_threshold must lie in [0, 1), got {self.weight_threshold}")


@dataclass(frozen=True)
class DseRemoval:
    tip: tuple[int, int]
    branch: tuple[int, int]
    edge_area: int
    skeleton_area: int
    weight: float


def edge_weight(a_s: int, a_e: int) -> float:
    """Relevance weight ``1 - (a_s - a_e) / a_s`` of an end branch."""
    if a_s <= 0:
        raise InvalidInputError("skeleton area must be positive")
    if not 0 <= a_e <= a_s:
        raise InvalidInputError(f"edge area {a_e} outside [0, {a_s}]")
    return 1.0 - (a_s - a_e) / a_s


def dse_prune(g: SkeletonGraph, params: DseParams | None = None) -> SkeletonGraph:
    return dse_prune_traced(g, params)[0]


def dse_prune_traced(g: SkeletonGraph, params: DseParams | None = None):
    """Prune a skeleton graph; also return the removals in order."""
    params = params or DseParams()
    removed: list[DseRemoval] = []
    while True:
        a_s = g.area
        if a_s == 0:
            break
        scored = []
        for _, e in g.endpoint_edges():
            tip = g.tip_of(e).position
            scored.append((edge_weight(a_s, e.length), e.length, tip, e))
        if not scored:
            break
        weight, a_e, tip, edge = min(scored, key=lambda s: s[:3])
        if weight >= params.weight_threshold:
            break
        removed.append(DseRemoval(tip, g.base_of(edge).position, a_e, a_s, weight))
        log.debug("dse: removing end branch at %s (w=%.5f)", tip, weight)
        g = g.without(edge.chain)
    return g, removed
