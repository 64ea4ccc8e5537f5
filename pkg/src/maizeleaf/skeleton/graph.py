"""Skeleton graphs: end points, merged branch clusters and the pixel chains between them.

Pixels are counted with 8-connectivity. A skeleton pixel with exactly one
neighbour is an end point; pixels with three or more neighbours are branch
pixels, and 8-adjacent branch pixels form one branch node. Every other
pixel belongs to exactly one edge chain; end-point pixels are the first or
last element of their edge's chain, while branch-cluster pixels belong to
their node only.

Clusters that end up joining fewer than three chain ends are artefacts of
thick junctions (or of pruning) and are dissolved into the adjoining chains,
so every branch node in a :class:`SkeletonGraph` has degree three or more.
"""

from __future__ import annotations

import itertools
from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import ndimage

from ..raster import EIGHT_CONNECTED, check_mask

Pixel = tuple[int, int]

ENDPOINT = "endpoint"
BRANCH = "branch"

_OFFSETS = tuple((dx, dy) for dx in (-1, 0, 1) for dy in (-1, 0, 1) if dx or dy)


@dataclass(frozen=True)
class Node:
    id: int
    kind: str
    position: Pixel
    pixels: tuple[Pixel, ...] = ()  # cluster pixels; empty for end points


@dataclass(frozen=True)
class Edge:
    node_a: int | None
    node_b: int | None
    chain: tuple[Pixel, ...]

    @property
    def length(self) -> int:
        return len(self.chain)

    def other(self, node_id: int) -> int | None:
        return self.node_b if self.node_a == node_id else self.node_a


@dataclass(frozen=True, eq=False)
class SkeletonGraph:
    mask: np.ndarray
    nodes: tuple[Node, ...]
    edges: tuple[Edge, ...]

    @property
    def shape(self) -> tuple[int, int]:
        return self.mask.shape

    @property
    def height(self) -> int:
        return self.mask.shape[0]

    @property
    def width(self) -> int:
        return self.mask.shape[1]

    @cached_property
    def area(self) -> int:
        return int(np.count_nonzero(self.mask))

    @cached_property
    def incident(self) -> dict[int, list[int]]:
        """Node id -> indices of incident edges (a self-loop is listed twice)."""
        out: dict[int, list[int]] = defaultdict(list)
        for i, e in enumerate(self.edges):
            if e.node_a is not None:
                out[e.node_a].append(i)
            if e.node_b is not None:
                out[e.node_b].append(i)
        return out

    def node(self, node_id: int) -> Node:
        return self.nodes[node_id]

    def degree(self, node_id: int) -> int:
        return len(self.incident.get(node_id, ()))

    @property
    def endpoints(self) -> list[Node]:
        return [n for n in self.nodes if n.kind == ENDPOINT]

    @property
    def branches(self) -> list[Node]:
        return [n for n in self.nodes if n.kind == BRANCH]

    def is_endpoint_edge(self, edge: Edge) -> bool:
        """True for an edge joining an end point to a branch node."""
        kinds = {self.nodes[i].kind for i in (edge.node_a, edge.node_b) if i is not None}
        return kinds == {ENDPOINT, BRANCH}

    def endpoint_edges(self) -> list[tuple[int, Edge]]:
        return [(i, e) for i, e in enumerate(self.edges) if self.is_endpoint_edge(e)]

    def tip_of(self, edge: Edge) -> Node:
        """The end-point node of an end-point edge."""
        for i in (edge.node_a, edge.node_b):
            if i is not None and self.nodes[i].kind == ENDPOINT:
                return self.nodes[i]
        raise ValueError("edge has no end point")

    def base_of(self, edge: Edge) -> Node:
        """The branch node of an end-point edge."""
        for i in (edge.node_a, edge.node_b):
            if i is not None and self.nodes[i].kind == BRANCH:
                return self.nodes[i]
        raise ValueError("edge has no branch node")

    def pixels(self) -> list[Pixel]:
        return [tuple(p) for p in np.argwhere(self.mask).tolist()]

    def without(self, pixels) -> "SkeletonGraph":
        """Delete pixels and re-extract the graph.

        Branch-cluster pixels left dangling by the deletion (one or no
        remaining neighbour) are trimmed as well, so removing a side branch
        never leaves a stub behind at its junction.
        """
        pixels = set(pixels)
        if not pixels:
            return self
        mask = self.mask.copy()
        for x, y in pixels:
            mask[x, y] = False
        cluster_pixels = set()
        for n in self.branches:
            if any(_adjacent_to(p, pixels) for p in n.pixels):
                cluster_pixels.update(n.pixels)
        cluster_pixels -= pixels
        _trim_dangling(mask, cluster_pixels)
        return extract_graph(mask)

    def to_dict(self) -> dict:
        return {
            "height": self.height,
            "width": self.width,
            "nodes": [
                {"id": n.id, "kind": n.kind, "position": list(n.position),
                 "pixels": [list(p) for p in n.pixels]}
                for n in self.nodes
            ],
            "edges": [
                {"node_a": e.node_a, "node_b": e.node_b, "length": e.length,
                 "chain": [list(p) for p in e.chain]}
                for e in self.edges
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SkeletonGraph":
        mask = np.zeros((data["height"], data["width"]), dtype=bool)
        nodes = tuple(
            Node(n["id"], n["kind"], tuple(n["position"]), tuple(tuple(p) for p in n["pixels"]))
            for n in data["nodes"]
        )
        edges = tuple(
            Edge(e["node_a"], e["node_b"], tuple(tuple(p) for p in e["chain"]))
            for e in data["edges"]
        )
        for n in nodes:
            for x, y in n.pixels:
                mask[x, y] = True
        for e in edges:
            for x, y in e.chain:
                mask[x, y] = True
        return cls(mask, nodes, edges)


def _adjacent_to(p: Pixel, pixels: set[Pixel]) -> bool:
    return any((p[0] + dx, p[1] + dy) in pixels for dx, dy in _OFFSETS)


def _neighbours(mask: np.ndarray, p: Pixel) -> list[Pixel]:
    h, w = mask.shape
    out = []
    for dx, dy in _OFFSETS:
        x, y = p[0] + dx, p[1] + dy
        if 0 <= x < h and 0 <= y < w and mask[x, y]:
            out.append((x, y))
    return out


def _trim_dangling(mask: np.ndarray, candidates: set[Pixel]) -> None:
    changed = True
    while changed:
        changed = False
        for p in sorted(candidates):
            if not mask[p]:
                continue
            nbrs = _neighbours(mask, p)
            if len(nbrs) == 0:
                continue  # never erase a component outright
            if len(nbrs) == 1:
                mask[p] = False
                changed = True


def neighbour_count(mask) -> np.ndarray:
    m = check_mask(mask).astype(np.int64)
    counts = ndimage.convolve(m, np.ones((3, 3), dtype=np.int64), mode="constant") - m
    return counts * m


def _is_adjacent(a: Pixel, b: Pixel) -> bool:
    return max(abs(a[0] - b[0]), abs(a[1] - b[1])) == 1


def _representative(pixels) -> Pixel:
    """Cluster pixel nearest the cluster centroid (ties: smallest coordinates)."""
    arr = np.asarray(pixels, dtype=float)
    cx, cy = arr.mean(axis=0)
    return min(pixels, key=lambda p: ((p[0] - cx) ** 2 + (p[1] - cy) ** 2, p))


def _order_cluster(pixels: list[Pixel], entry_from: Pixel | None, exit_to: Pixel | None) -> list[Pixel]:
    """Order cluster pixels into an 8-connected sequence.

    The sequence starts next to ``entry_from`` and, when possible, ends next
    to ``exit_to``. Small clusters are searched exhaustively for a path that
    visits every pixel; otherwise a greedy nearest-neighbour walk is used.
    """
    pixels = sorted(pixels)
    if len(pixels) == 1:
        return pixels

    def ok_start(p):
        return entry_from is None or _is_adjacent(p, entry_from)

    def ok_end(p):
        return exit_to is None or _is_adjacent(p, exit_to)

    if len(pixels) <= 7:
        fallback = None
        for perm in itertools.permutations(pixels):
            if not ok_start(perm[0]):
                continue
            if all(_is_adjacent(a, b) for a, b in zip(perm, perm[1:])):
                if ok_end(perm[-1]):
                    return list(perm)
                fallback = fallback or list(perm)
        if fallback:
            return fallback

    start = next((p for p in pixels if ok_start(p)), pixels[0])
    order = [start]
    rest = set(pixels) - {start}
    while rest:
        last = order[-1]
        nxt = min(rest, key=lambda p: (max(abs(p[0] - last[0]), abs(p[1] - last[1])),
                                       0 if not ok_end(p) else 1, p))
        order.append(nxt)
        rest.remove(nxt)
    return order


@dataclass
class _RawEdge:
    a: object  # node key: ("c", label) or ("e", pixel) or None
    b: object
    chain: list[Pixel] = field(default_factory=list)


def extract_graph(skel) -> SkeletonGraph:
    """Build the node/edge graph of a thinned skeleton."""
    mask = check_mask(skel).copy()
    counts = neighbour_count(mask)
    branch_mask = counts >= 3
    labels, n_clusters = ndimage.label(branch_mask, structure=EIGHT_CONNECTED)

    cluster_of: dict[Pixel, int] = {}
    clusters: dict[int, list[Pixel]] = defaultdict(list)
    for x, y in np.argwhere(branch_mask).tolist():
        lab = int(labels[x, y])
        cluster_of[(x, y)] = lab
        clusters[lab].append((x, y))

    def key_of(p: Pixel):
        if p in cluster_of:
            return ("c", cluster_of[p])
        if counts[p] <= 1:
            return ("e", p)
        return None

    visited: set[Pixel] = set()
    raw: list[_RawEdge] = []

    def walk(start_key, prev: Pixel | None, first: Pixel) -> _RawEdge:
        edge = _RawEdge(start_key, None)
        cur, before = first, prev
        while True:
            k = key_of(cur)
            if k is not None and k[0] == "c":
                edge.b = k
                return edge
            edge.chain.append(cur)
            visited.add(cur)
            if k is not None and k[0] == "e" and (cur != first or start_key != k):
                edge.b = k
                return edge
            nxt = [q for q in _neighbours(mask, cur) if q != before and q not in visited]
            if not nxt:
                # isolated pixel, or a walk that closed on itself
                back = [q for q in _neighbours(mask, cur) if q != before and q in cluster_of]
                edge.b = ("c", cluster_of[back[0]]) if back else (k if k else None)
                return edge
            # prefer stepping onto a cluster or end point when both are possible
            nxt.sort(key=lambda q: (key_of(q) is None, q))
            before, cur = cur, nxt[0]

    # edges leaving end points
    for x, y in np.argwhere(mask & (counts <= 1)).tolist():
        p = (x, y)
        if p in visited:
            continue
        if counts[p] == 0:
            visited.add(p)
            raw.append(_RawEdge(("e", p), ("e", p), [p]))
            continue
        raw.append(walk(("e", p), None, p))

    # edges leaving branch clusters
    for lab in sorted(clusters):
        for p in sorted(clusters[lab]):
            for q in _neighbours(mask, p):
                if q in cluster_of or q in visited:
                    continue
                raw.append(walk(("c", lab), p, q))

    # node-free cycles
    for x, y in np.argwhere(mask).tolist():
        p = (x, y)
        if p in visited or p in cluster_of:
            continue
        e = walk(None, None, p)
        e.a = e.b = None
        raw.append(e)

    raw, clusters = _simplify(raw, clusters)
    return _assemble(mask, raw, clusters)


def _simplify(raw: list[_RawEdge], clusters: dict[int, list[Pixel]]):
    """Absorb tiny self-loops into clusters, dissolve clusters of degree < 3."""
    clusters = {k: list(v) for k, v in clusters.items()}

    changed = True
    while changed:
        changed = False
        for e in list(raw):
            if e.a == e.b and e.a is not None and e.a[0] == "c" and len(e.chain) <= 2:
                clusters[e.a[1]].extend(e.chain)
                raw.remove(e)
                changed = True

    def ends_at(lab):
        key = ("c", lab)
        return [(e, side) for e in raw for side in ("a", "b") if getattr(e, side) == key]

    changed = True
    while changed:
        changed = False
        for lab in sorted(clusters):
            ends = ends_at(lab)
            key = ("c", lab)
            pix = clusters[lab]
            if len(ends) >= 3:
                continue
            if len(ends) == 2 and ends[0][0] is ends[1][0]:
                # single loop through the cluster: a ring with a blob on it
                e = ends[0][0]
                first = e.chain[0] if e.chain else None
                last = e.chain[-1] if e.chain else None
                e.chain = e.chain + _order_cluster(pix, last, first)
                e.a = e.b = None
            elif len(ends) == 2:
                (e1, s1), (e2, s2) = ends
                c1 = e1.chain if s1 == "b" else e1.chain[::-1]
                c2 = e2.chain if s2 == "a" else e2.chain[::-1]
                far1 = e1.a if s1 == "b" else e1.b
                far2 = e2.b if s2 == "a" else e2.a
                middle = _order_cluster(pix, c1[-1] if c1 else None, c2[0] if c2 else None)
                merged = _RawEdge(far1, far2, c1 + middle + c2)
                raw.remove(e1)
                raw.remove(e2)
                raw.append(merged)
                # endpoints adjacent to each other through a single edge keep working
            elif len(ends) == 1:
                e, s = ends[0]
                chain = e.chain if s == "b" else e.chain[::-1]
                far = e.a if s == "b" else e.b
                tail = _order_cluster(pix, chain[-1] if chain else None, None)
                full = chain + tail
                e.a, e.b, e.chain = far, ("e", full[-1]), full
            else:
                ordered = _order_cluster(pix, None, None)
                raw.append(_RawEdge(("e", ordered[0]), ("e", ordered[-1]), ordered))
            del clusters[lab]
            # references to the dissolved cluster key may remain on loops; none expected
            assert all(key not in (e.a, e.b) for e in raw)
            changed = True
            break
    return raw, clusters


def _assemble(mask: np.ndarray, raw: list[_RawEdge], clusters: dict[int, list[Pixel]]) -> SkeletonGraph:
    specs: dict[object, tuple[str, Pixel, tuple[Pixel, ...]]] = {}
    for lab, pix in clusters.items():
        specs[("c", lab)] = (BRANCH, _representative(pix), tuple(sorted(pix)))
    for e in raw:
        for k in (e.a, e.b):
            if k is not None and k[0] == "e":
                specs[k] = (ENDPOINT, k[1], ())

    ordered_keys = sorted(specs, key=lambda k: (specs[k][1], specs[k][0]))
    ids = {k: i for i, k in enumerate(ordered_keys)}
    nodes = tuple(Node(ids[k], *specs[k]) for k in ordered_keys)

    edges = []
    for e in raw:
        a = ids.get(e.a) if e.a is not None else None
        b = ids.get(e.b) if e.b is not None else None
        chain = list(e.chain)
        if a is not None and b is not None and (a > b or (a == b and chain and chain[0] > chain[-1])):
            a, b, chain = b, a, chain[::-1]
        edges.append(Edge(a, b, tuple(chain)))
    edges.sort(key=lambda e: (
        -1 if e.node_a is None else e.node_a,
        -1 if e.node_b is None else e.node_b,
        e.chain,
    ))
    return SkeletonGraph(mask, nodes, tuple(edges))
