"""Interpretation of a skeleton graph as a maize plant: stem path and leaf candidates.

The root anchor is the lowest skeleton pixel (largest ``x``, ties to the
smaller ``y``). From there the stem climbs greedily: at every node it takes
the unvisited incident chain that rises most steeply per pixel of length,
preferring the longer chain and then the smaller far-end position on ties,
until it reaches an end point.

Everything hanging off a stem node that is not itself on the stem is a
side subtree. Each side subtree yields one leaf candidate, running from its
stem node to the subtree end point farthest along the skeleton; the
subtree's other pixels (small forks on a leaf) go with it when the
candidate is deleted.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field, replace
from enum import Enum

from ..errors import InvalidInputError, MalformedSkeletonError
from .graph import BRANCH, ENDPOINT, Pixel, SkeletonGraph


class Label(str, Enum):
    LEAF = "leaf"
    SPUR = "spur"
    STEM = "stem"
    OCCLUDED = "occluded"


DETECTED = "detected"
RECONCILED = "reconciled"


@dataclass(frozen=True)
class LeafCandidate:
    """A leaf hypothesis: stem attachment, tip and the pixel path between them.

    Occluded candidates are predictions without a chain; their positions may
    be copied from a neighbouring day, or be missing altogether when only the
    count could be corrected.
    """

    branch: Pixel | None
    tip: Pixel | None
    chain: tuple[Pixel, ...] = ()
    label: Label = Label.LEAF
    provenance: str = DETECTED

    def __post_init__(self):
        if self.label is not Label.OCCLUDED:
            if not self.chain or self.chain[0] != self.branch or self.chain[-1] != self.tip:
                raise InvalidInputError("a detected candidate's chain must run from branch to tip")
            if len(self.chain) < 2:
                raise InvalidInputError("a detected candidate needs a chain of length >= 1")
        elif self.chain:
            raise InvalidInputError("occluded candidates have no chain")

    @property
    def length(self) -> int:
        return max(len(self.chain) - 1, 0)

    @property
    def has_position(self) -> bool:
        return self.branch is not None and self.tip is not None

    def relabel(self, label: Label, provenance: str | None = None) -> "LeafCandidate":
        return replace(self, label=label, provenance=provenance or self.provenance)

    def to_dict(self) -> dict:
        return {
            "branch": None if self.branch is None else list(self.branch),
            "tip": None if self.tip is None else list(self.tip),
            "length": self.length,
            "label": self.label.value,
            "provenance": self.provenance,
            "chain": [list(p) for p in self.chain],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LeafCandidate":
        def pt(v):
            return None if v is None else (int(v[0]), int(v[1]))

        return cls(pt(d.get("branch")), pt(d.get("tip")),
                   tuple(pt(p) for p in d.get("chain", ())),
                   Label(d.get("label", "leaf")), d.get("provenance", DETECTED))

    @classmethod
    def occluded(cls, branch=None, tip=None, provenance: str = RECONCILED) -> "LeafCandidate":
        return cls(branch, tip, (), Label.OCCLUDED, provenance)


@dataclass(frozen=True)
class PlantStructure:
    """Stem path, leaf candidates and the pixels each candidate owns."""

    anchor: Pixel
    stem_nodes: tuple[Pixel, ...]  # positions from the root anchor upwards
    stem_pixels: frozenset[Pixel]
    candidates: tuple[LeafCandidate, ...]
    owned_pixels: tuple[frozenset[Pixel], ...]  # parallel to candidates
    root_tail: frozenset[Pixel] = field(default_factory=frozenset)
    stem_segments: tuple[tuple[Pixel, ...], ...] = ()  # chain from stem_nodes[i] to stem_nodes[i + 1]

    def stem_index(self, position: Pixel) -> int | None:
        try:
            return self.stem_nodes.index(position)
        except ValueError:
            return None

    def upward_direction(self, position: Pixel) -> tuple[float, float]:
        """Unit vector from a stem node to the next stem node above it (vertical if none)."""
        i = self.stem_index(position)
        if i is not None and i + 1 < len(self.stem_nodes):
            nxt = self.stem_nodes[i + 1]
            dx, dy = nxt[0] - position[0], nxt[1] - position[1]
            norm = (dx * dx + dy * dy) ** 0.5
            if norm > 0:
                return dx / norm, dy / norm
        return -1.0, 0.0

    @property
    def branch_points(self) -> list[Pixel]:
        """Distinct attachment points of leaf candidates, topmost first."""
        return sorted({c.branch for c in self.candidates})

    def candidates_at(self, position: Pixel) -> list[int]:
        return [i for i, c in enumerate(self.candidates) if c.branch == position]


# --- internal adjacency -------------------------------------------------------

# Node key of the anchor when the lowest pixel lies inside a chain. A chain
# hanging off it counts as a leaf only if its tip rises above the anchor row;
# a flat stub along the bottom row belongs to the root.
VIRTUAL_ANCHOR = "anchor"


@dataclass(frozen=True)
class _Half:
    """A chain seen from one of its ends."""

    edge: int
    far: object  # node key
    chain: tuple[Pixel, ...]  # oriented away from the near node


def _adjacency(g: SkeletonGraph):
    pos: dict[object, Pixel] = {}
    kind: dict[object, str] = {}
    cluster: dict[object, tuple[Pixel, ...]] = {}
    adj: dict[object, list[_Half]] = {}
    for n in g.nodes:
        pos[n.id] = n.position
        kind[n.id] = n.kind
        cluster[n.id] = n.pixels
        adj[n.id] = []
    for i, e in enumerate(g.edges):
        if e.node_a is None:
            continue
        adj[e.node_a].append(_Half(i, e.node_b, e.chain))
        if e.node_a != e.node_b or len(e.chain) > 1:
            adj[e.node_b].append(_Half(i, e.node_a, e.chain[::-1]))
    return pos, kind, cluster, adj


def _split_at_anchor(g: SkeletonGraph, anchor: Pixel, pos, kind, cluster, adj):
    """Return the node key holding the anchor, inserting a virtual node mid-chain."""
    for n in g.nodes:
        if n.position == anchor or anchor in n.pixels:
            return n.id
    key = VIRTUAL_ANCHOR
    for i, e in enumerate(g.edges):
        if anchor not in e.chain:
            continue
        k = e.chain.index(anchor)
        before, after = e.chain[:k], e.chain[k + 1:]
        pos[key], kind[key], cluster[key], adj[key] = anchor, BRANCH, (anchor,), []
        if e.node_a is None:  # cycle without nodes
            adj[key].append(_Half(i, key, after + before))
            return key
        adj[e.node_a] = [h for h in adj[e.node_a] if h.edge != i]
        adj[e.node_b] = [h for h in adj[e.node_b] if h.edge != i]
        adj[key].append(_Half(i, e.node_a, before[::-1]))
        adj[key].append(_Half(-1 - i, e.node_b, after))
        adj[e.node_a].append(_Half(i, key, before))
        adj[e.node_b].append(_Half(-1 - i, key, after[::-1]))
        return key
    raise MalformedSkeletonError(f"anchor {anchor} is not on the skeleton")


def _rise(h: _Half, near: Pixel, pos) -> tuple[float, int, Pixel]:
    far = pos[h.far] if h.far is not None else (h.chain[-1] if h.chain else near)
    length = max(len(h.chain), 1)
    return (near[0] - far[0]) / length, length, far


def identify_stem_and_leaves(g: SkeletonGraph) -> PlantStructure:
    """Find the stem path and the leaf candidates hanging off it."""
    if not g.endpoints:
        raise MalformedSkeletonError("skeleton has no end points")
    pixels = g.pixels()
    anchor = max(pixels, key=lambda p: (p[0], -p[1]))
    pos, kind, cluster, adj = _adjacency(g)
    start = _split_at_anchor(g, anchor, pos, kind, cluster, adj)

    # greedy ascent
    stem_keys = [start]
    segments: list[tuple[Pixel, ...]] = []
    used_edges: set[int] = set()
    stem_pixels: set[Pixel] = set(cluster[start]) | {pos[start]}
    current = start
    while True:
        options = [h for h in adj[current] if h.edge not in used_edges and h.far not in stem_keys]
        if not options:
            break
        best = min(options, key=lambda h: (-_rise(h, pos[current], pos)[0],
                                           -_rise(h, pos[current], pos)[1],
                                           _rise(h, pos[current], pos)[2]))
        used_edges.add(best.edge)
        segments.append(best.chain)
        stem_pixels.update(best.chain)
        current = best.far
        stem_keys.append(current)
        stem_pixels.update(cluster[current])
        stem_pixels.add(pos[current])
        if kind[current] == ENDPOINT:
            break

    stem_set = set(stem_keys)
    claimed_edges = set(used_edges)
    candidates: list[LeafCandidate] = []
    owned: list[frozenset[Pixel]] = []
    root_stub: set[Pixel] = set()

    for key in stem_keys:
        for h in sorted(adj[key], key=lambda h: (h.chain[:1], h.edge)):
            if h.edge in claimed_edges:
                continue
            cand, own, edges = _side_subtree(key, h, pos, kind, cluster, adj, stem_set, claimed_edges)
            claimed_edges |= edges
            if key == VIRTUAL_ANCHOR and (cand is None or cand.tip[0] >= anchor[0]):
                root_stub |= own - stem_pixels
            elif cand is not None:
                candidates.append(cand)
                owned.append(frozenset(own - stem_pixels))

    # root tail: stem pixels below the lowest attachment
    root_tail: set[Pixel] = set(root_stub)
    attach = {c.branch for c in candidates}
    if attach:
        for k_idx, key in enumerate(stem_keys):
            if pos[key] in attach:
                break
        lowest_attach = stem_keys[k_idx]
        if lowest_attach != start:
            walk_edges = []
            cur = start
            for nxt in stem_keys[1:]:
                h = next(h for h in adj[cur] if h.far == nxt and h.edge in used_edges)
                walk_edges.append(h)
                if nxt == lowest_attach:
                    break
                cur = nxt
            for h in walk_edges:
                root_tail.update(h.chain)
            for key in stem_keys[: stem_keys.index(lowest_attach)]:
                root_tail.update(cluster[key])
                root_tail.add(pos[key])

    order = sorted(range(len(candidates)), key=lambda i: (candidates[i].branch, candidates[i].tip))
    return PlantStructure(
        anchor=anchor,
        stem_nodes=tuple(pos[k] for k in stem_keys),
        stem_pixels=frozenset(stem_pixels),
        candidates=tuple(candidates[i] for i in order),
        owned_pixels=tuple(owned[i] for i in order),
        root_tail=frozenset(root_tail),
        stem_segments=tuple(segments),
    )


def _side_subtree(root_key, first: _Half, pos, kind, cluster, adj, stem_set, claimed):
    """Explore a side subtree and return (candidate, owned pixels, edges used)."""
    root_pos = pos[root_key]
    # Dijkstra over the subtree; path lengths in pixels
    dist = {}
    back = {}
    edges_used = {first.edge}
    own: set[Pixel] = set(first.chain)
    heap = []
    best_end = None

    def reach(node, d, path):
        if node in stem_set or node is None:
            return
        if node not in dist or d < dist[node]:
            dist[node] = d
            back[node] = path
            heapq.heappush(heap, (d, str(node), node))

    if first.far is None or first.far in stem_set:
        # loop back to the stem or a node-free fragment: no tip to point at
        return None, own, edges_used
    reach(first.far, len(first.chain) + 1, list(first.chain))
    while heap:
        d, _, node = heapq.heappop(heap)
        if d > dist[node]:
            continue
        own.update(cluster[node])
        own.add(pos[node])
        if kind[node] == ENDPOINT:
            if best_end is None or (d, _neg(pos[node])) > (dist[best_end], _neg(pos[best_end])):
                best_end = node
            continue
        for h in adj[node]:
            if h.edge in claimed or h.edge in edges_used and h.far in dist:
                continue
            edges_used.add(h.edge)
            own.update(h.chain)
            reach(h.far, d + len(h.chain) + 1, back[node] + [pos[node]] + list(h.chain))

    if best_end is None:
        return None, own, edges_used
    chain = [root_pos] + back[best_end]
    tip = pos[best_end]
    if chain[-1] != tip:
        chain.append(tip)
    return LeafCandidate(root_pos, tip, tuple(chain)), own, edges_used


def _neg(p: Pixel) -> tuple[int, int]:
    # prefer the higher, then leftmost tip on equal path length
    return (-p[0], -p[1])
