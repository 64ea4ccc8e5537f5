import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import ndimage

from maizeleaf.errors import InvalidInputError, MalformedSkeletonError
from maizeleaf.hull import View
from maizeleaf.pipeline.synth import make_plant, plant_mask
from maizeleaf.raster import EIGHT_CONNECTED
from maizeleaf.skeleton.graph import BRANCH, ENDPOINT, SkeletonGraph, extract_graph
from maizeleaf.skeleton.plant import Label, LeafCandidate, identify_stem_and_leaves
from maizeleaf.skeleton.thinning import neighbour_codes, simple_lut, skeletonize, thin_fast_parallel, thin_medial_axis
from shapes import draw, shape_corpus, stick_plant, thick


def naive_zhang_suen(mask):
    """Textbook two-subiteration thinning written out neighbour by neighbour."""
    img = np.pad(mask.astype(np.uint8), 1).tolist()
    h, w = len(img), len(img[0])

    def neighbours(x, y):
        return [img[x - 1][y], img[x - 1][y + 1], img[x][y + 1], img[x + 1][y + 1],
                img[x + 1][y], img[x + 1][y - 1], img[x][y - 1], img[x - 1][y - 1]]

    changed = True
    while changed:
        changed = False
        for step in (0, 1):
            doomed = []
            for x in range(1, h - 1):
                for y in range(1, w - 1):
                    if not img[x][y]:
                        continue
                    p2, p3, p4, p5, p6, p7, p8, p9 = n = neighbours(x, y)
                    b = sum(n)
                    a = sum(1 for k in range(8) if n[k] == 0 and n[(k + 1) % 8] == 1)
                    if not (2 <= b <= 6 and a == 1):
                        continue
                    if step == 0 and p2 * p4 * p6 == 0 and p4 * p6 * p8 == 0:
                        doomed.append((x, y))
                    if step == 1 and p2 * p4 * p8 == 0 and p2 * p6 * p8 == 0:
                        doomed.append((x, y))
            for x, y in doomed:
                img[x][y] = 0
            changed |= bool(doomed)
    return np.array(img, dtype=bool)[1:-1, 1:-1]


def n_components(m):
    return ndimage.label(m, structure=EIGHT_CONNECTED)[1]


def cluster_pixels(g):
    return {p for n in g.nodes if n.kind == BRANCH for p in n.pixels}


def blocks_outside_clusters(skel):
    """Top-left corners of fully set 2x2 blocks not inside a branch cluster."""
    g = extract_graph(skel)
    inside = cluster_pixels(g)
    full = skel[:-1, :-1] & skel[1:, :-1] & skel[:-1, 1:] & skel[1:, 1:]
    bad = []
    for x, y in np.argwhere(full):
        block = {(x, y), (x + 1, y), (x, y + 1), (x + 1, y + 1)}
        if not block <= inside:
            bad.append((int(x), int(y)))
    return bad


def removable_blocks_outside_clusters(skel):
    """Blocks outside branch clusters with at least one pixel whose deletion keeps the topology."""
    codes = neighbour_codes(np.pad(skel, 1))[1:-1, 1:-1]
    simple = simple_lut()
    return [(x, y) for x, y in blocks_outside_clusters(skel)
            if simple[codes[x:x + 2, y:y + 2]].any()]


# A noise mask riddled with one-pixel holes; parallel thinning locks a 2x2
# block between them that no topology-preserving deletion can open.
HOLEY = np.unpackbits(np.array(
    [[255, 191], [239, 123], [255, 183], [105, 235], [123, 23], [246, 59], [126, 127], [245, 70],
     [255, 255], [252, 183], [235, 222], [253, 252], [189, 255], [253, 79], [187, 159], [219, 236]],
    dtype=np.uint8), axis=1).astype(bool)


def synthetic_plant_masks():
    spec = make_plant("p", np.random.default_rng(0), occlusion=False, spur=False)
    return {f"synth_d{d}": plant_mask(spec, d, View.VIEW0)[0] for d in (2, 9, 16, 24)}


CORPUS = {**shape_corpus(), **synthetic_plant_masks()}
THINNERS = {"fast_parallel": thin_fast_parallel, "medial_axis": thin_medial_axis}


def test_corpus_size():
    assert len(CORPUS) >= 30


@pytest.mark.parametrize("thinner", THINNERS)
@pytest.mark.parametrize("name", sorted(CORPUS))
def test_thinning_invariants(name, thinner):
    mask = CORPUS[name]
    skel = THINNERS[thinner](mask)
    assert not (skel & ~mask).any(), "skeleton leaves the mask"
    assert n_components(skel) == n_components(mask)
    assert blocks_outside_clusters(skel) == []
    assert np.array_equal(THINNERS[thinner](skel), skel), "not idempotent"


@pytest.mark.parametrize("name", ["rect5x21", "rect3x20", "hline", "plus3", "ell", "tee", "stick_plant"])
def test_fast_parallel_matches_reference_when_topology_is_safe(name):
    mask = CORPUS[name]
    ref = naive_zhang_suen(mask)
    assert n_components(ref) == n_components(mask)
    assert np.array_equal(thin_fast_parallel(mask), ref)


def test_fast_parallel_keeps_2x2_square_connected():
    # plain parallel deletion erases a 2x2 square entirely
    m = CORPUS["rect2x2"]
    assert not naive_zhang_suen(m).any()
    skel = thin_fast_parallel(m)
    assert skel.any() and n_components(skel) == 1
    assert not (skel[:-1, :-1] & skel[1:, :-1] & skel[:-1, 1:] & skel[1:, 1:]).any()


def test_line_unchanged():
    m = CORPUS["hline"]
    assert np.array_equal(thin_fast_parallel(m), m)
    assert np.array_equal(thin_medial_axis(m), m)


def test_rectangle_becomes_horizontal_path():
    skel = thin_fast_parallel(CORPUS["rect5x21"])
    rows = np.nonzero(skel.any(axis=1))[0]
    assert len(rows) == 1
    assert skel.sum() >= 15
    g = extract_graph(skel)
    assert len(g.endpoints) == 2 and not g.branches


@pytest.mark.parametrize("thinner", THINNERS)
def test_plus_sign_has_one_cluster_and_four_arms(thinner):
    g = extract_graph(THINNERS[thinner](CORPUS["plus3"]))
    assert len(g.branches) == 1
    assert len(g.endpoints) == 4
    assert len(g.edges) == 4


def test_disk_thins_to_small_cluster():
    skel = thin_medial_axis(CORPUS["disk10"])
    assert 0 < skel.sum() < 10
    assert n_components(skel) == 1


def test_two_lobes_stay_connected():
    m = CORPUS["two_lobes"]
    assert n_components(thin_medial_axis(m)) == n_components(m) == 1


def test_empty_mask_gives_empty_skeleton():
    e = np.zeros((5, 5), bool)
    assert not thin_fast_parallel(e).any() and not thin_medial_axis(e).any()


def test_skeletonize_day_dispatch():
    m = CORPUS["stick_plant_wide"]
    assert np.array_equal(skeletonize(m, 10), thin_fast_parallel(m))
    assert np.array_equal(skeletonize(m, 11), thin_medial_axis(m))
    with pytest.raises(InvalidInputError):
        skeletonize(m, 0)


@settings(max_examples=40, deadline=None)
@given(arrays(bool, (14, 14)))
def test_thinning_properties_on_random_masks(m):
    for thin in THINNERS.values():
        s = thin(m)
        assert not (s & ~m).any()
        assert n_components(s) == n_components(m)
        assert removable_blocks_outside_clusters(s) == []
        assert np.array_equal(thin(s), s)
    assert blocks_outside_clusters(thin_medial_axis(m)) == []


def test_locked_block_on_holey_noise():
    s = thin_fast_parallel(HOLEY)
    blocks = blocks_outside_clusters(s)
    assert blocks and removable_blocks_outside_clusters(s) == []
    assert blocks_outside_clusters(thin_medial_axis(HOLEY)) == []


# --- graph ---------------------------------------------------------------------


def partition_holds(g):
    chains = [p for e in g.edges for p in e.chain]
    nodes = [p for n in g.nodes for p in n.pixels]
    all_pixels = chains + nodes
    return len(all_pixels) == len(set(all_pixels)) == g.area == int(g.mask.sum())


def test_graph_of_line():
    m = np.zeros((10, 20), bool); m[5, 2:15] = True
    g = extract_graph(m)
    assert len(g.endpoints) == 2 and not g.branches and len(g.edges) == 1
    assert partition_holds(g)


def test_graph_of_tee():
    m = np.zeros((20, 20), bool); m[2, 2:15] = True; m[2:15, 8] = True
    g = extract_graph(m)
    assert len(g.endpoints) == 3 and len(g.branches) == 1 and len(g.edges) == 3
    assert partition_holds(g)


def test_graph_of_x_with_single_center():
    m = np.zeros((21, 21), bool)
    for i in range(-8, 9):
        m[10 + i, 10 + i] = m[10 + i, 10 - i] = True
    g = extract_graph(m)
    (b,) = g.branches
    assert b.pixels == ((10, 10),) or set(b.pixels) == {(10, 10)}
    assert len(g.endpoints) == 4 and len(g.edges) == 4


def test_branch_node_position_is_a_cluster_pixel_near_centroid():
    g = extract_graph(thin_fast_parallel(CORPUS["plus5"]))
    for n in g.branches:
        assert n.position in n.pixels
        c = np.mean(n.pixels, axis=0)
        best = min(np.hypot(*(np.array(p) - c)) for p in n.pixels)
        assert np.hypot(*(np.array(n.position) - c)) == pytest.approx(best)


def test_endpoint_has_one_neighbour_and_chains_are_connected():
    g = extract_graph(stick_plant())
    m = np.pad(g.mask, 1)
    for n in g.endpoints:
        x, y = n.position
        assert m[x:x + 3, y:y + 3].sum() - 1 == 1
    for e in g.edges:
        assert e.length == len(e.chain)
        for p, q in zip(e.chain, e.chain[1:]):
            assert max(abs(p[0] - q[0]), abs(p[1] - q[1])) == 1


def test_empty_and_isolated_and_ring():
    assert not extract_graph(np.zeros((4, 4), bool)).nodes
    m = np.zeros((5, 5), bool); m[2, 2] = True
    g = extract_graph(m)
    assert partition_holds(g)
    m = np.zeros((10, 10), bool); m[2, 2:7] = m[6, 2:7] = True; m[2:7, 2] = m[2:7, 6] = True
    g = extract_graph(m)
    assert partition_holds(g) and len(g.edges) == 1 and g.edges[0].length == 16


@pytest.mark.parametrize("name", sorted(CORPUS))
def test_partition_on_corpus(name):
    for thin in THINNERS.values():
        assert partition_holds(extract_graph(thin(CORPUS[name])))


def test_graph_json_round_trip():
    g = extract_graph(stick_plant())
    g2 = SkeletonGraph.from_dict(json.loads(json.dumps(g.to_dict())))
    assert np.array_equal(g2.mask, g.mask)
    assert [n.position for n in g2.nodes] == [n.position for n in g.nodes]
    assert [e.chain for e in g2.edges] == [e.chain for e in g.edges]


# --- plant structure ---------------------------------------------------------------


def test_minimal_plant_one_leaf():
    m = np.zeros((60, 40), bool)
    draw(m, (55, 20), (5, 20))
    draw(m, (30, 20), (15, 35))
    s = identify_stem_and_leaves(extract_graph(m))
    assert len(s.candidates) == 1
    c = s.candidates[0]
    assert c.label is Label.LEAF and c.tip == (15, 35)
    assert all(y == 20 for _, y in s.stem_nodes)
    clusters = cluster_pixels(extract_graph(m))
    assert all(y == 20 for x, y in s.stem_pixels if (x, y) not in clusters)


def test_alternating_four_leaf_plant():
    m = np.zeros((120, 80), bool)
    draw(m, (110, 40), (10, 40))
    for x, side in ((95, 1), (75, -1), (55, 1), (35, -1)):
        draw(m, (x, 40), (x - 20, 40 + side * 25))
    s = identify_stem_and_leaves(extract_graph(m))
    cands = sorted(s.candidates, key=lambda c: -c.branch[0])
    assert [c.tip for c in cands] == [(75, 65), (55, 15), (35, 65), (15, 15)]
    sides = [np.sign(c.tip[1] - 40) for c in cands]
    assert sides == [1, -1, 1, -1]
    assert s.anchor == (110, 40)
    assert [p for p, _ in [(q, 0) for q in s.branch_points]] == sorted(s.branch_points)


def test_bare_line_has_no_leaves():
    m = np.zeros((50, 50), bool)
    draw(m, (45, 20), (5, 20))
    assert identify_stem_and_leaves(extract_graph(m)).candidates == ()


def test_no_endpoints_is_malformed():
    m = np.zeros((10, 10), bool); m[2, 2:7] = m[6, 2:7] = True; m[2:7, 2] = m[2:7, 6] = True
    with pytest.raises(MalformedSkeletonError):
        identify_stem_and_leaves(extract_graph(m))


@pytest.mark.parametrize("name", ["stick_plant", "stick_plant_wide", "stick_plant_dense",
                                  "synth_d9", "synth_d16", "synth_d24"])
def test_candidates_attach_to_stem_and_are_disjoint(name):
    skel = thin_medial_axis(CORPUS[name])
    s = identify_stem_and_leaves(extract_graph(skel))
    stem = set(s.stem_pixels) | set(s.stem_nodes)
    seen = set()
    for c in s.candidates:
        assert c.branch in stem
        assert c.chain[0] == c.branch and c.chain[-1] == c.tip
        body = set(c.chain[1:])
        assert not body & seen
        seen |= body


def test_leaf_candidate_validation():
    with pytest.raises(InvalidInputError):
        LeafCandidate((0, 0), (3, 3), ((0, 0), (1, 1)), Label.LEAF)
    occ = LeafCandidate.occluded((1, 1), (5, 5))
    assert occ.label is Label.OCCLUDED and not occ.chain and occ.has_position
    assert LeafCandidate.from_dict(occ.to_dict()) == occ
