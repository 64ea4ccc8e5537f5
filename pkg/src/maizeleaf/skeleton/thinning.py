"""Thinning of binary plant silhouettes to 1-pixel-wide skeletons.

Two algorithms are provided:

* :func:`thin_fast_parallel` -- the two-subiteration parallel thinning of
  Zhang and Suen, driven by 256-entry lookup tables over the 8-neighbourhood.
* :func:`thin_medial_axis` -- a directional sweep thinning in the style of
  Lee, Kashyap and Chu, reduced to a single 2-D slice: each sweep collects
  border pixels that are simple and not end points, then re-checks them
  one by one before deleting.

:func:`skeletonize` dispatches between them by plant age.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy import ndimage

from ..errors import InvalidInputError
from ..raster import EIGHT_CONNECTED, check_mask

# Neighbour offsets in ring order P2..P9 (N, NE, E, SE, S, SW, W, NW);
# neighbour k contributes bit ``1 << k`` to a pixel's neighbourhood code.
RING = ((-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1))
N, NE, E, SE, S, SW, W, NW = range(8)
FOUR_NEIGHBOURS = (1 << N) | (1 << E) | (1 << S) | (1 << W)

# Last day (since emergence) handled by the parallel thinning.
FAST_PARALLEL_LAST_DAY = 10


def _bits(code: int) -> list[int]:
    return [(code >> k) & 1 for k in range(8)]


@lru_cache(maxsize=None)
def zhang_suen_luts() -> tuple[np.ndarray, np.ndarray]:
    """Deletion tables for the two subiterations, indexed by neighbourhood code."""
    first = np.zeros(256, dtype=bool)
    second = np.zeros(256, dtype=bool)
    for code in range(256):
        p = _bits(code)
        b = sum(p)
        a = sum(1 for k in range(8) if p[k] == 0 and p[(k + 1) % 8] == 1)
        if not (2 <= b <= 6 and a == 1):
            continue
        first[code] = p[N] * p[E] * p[S] == 0 and p[E] * p[S] * p[W] == 0
        second[code] = p[N] * p[E] * p[W] == 0 and p[N] * p[S] * p[W] == 0
    return first, second


def _components(cells: list[int], adjacent) -> int:
    seen: set[int] = set()
    count = 0
    for c in cells:
        if c in seen:
            continue
        count += 1
        stack = [c]
        seen.add(c)
        while stack:
            u = stack.pop()
            for v in cells:
                if v not in seen and adjacent(u, v):
                    seen.add(v)
                    stack.append(v)
    return count


@lru_cache(maxsize=None)
def simple_lut() -> np.ndarray:
    """True where deleting the centre pixel preserves (8, 4) topology.

    The centre is simple when its foreground neighbours form exactly one
    8-connected component and the background neighbours that are 4-adjacent
    to it belong to exactly one 4-connected background component.
    """
    table = np.zeros(256, dtype=bool)

    def adj8(u, v):
        du, dv = RING[u], RING[v]
        return max(abs(du[0] - dv[0]), abs(du[1] - dv[1])) == 1

    def adj4(u, v):
        du, dv = RING[u], RING[v]
        return abs(du[0] - dv[0]) + abs(du[1] - dv[1]) == 1

    for code in range(256):
        p = _bits(code)
        fg = [k for k in range(8) if p[k]]
        bg = [k for k in range(8) if not p[k]]
        if _components(fg, adj8) != 1:
            continue
        # background components touching a 4-neighbour of the centre
        seen: set[int] = set()
        touching = 0
        for start in (N, E, S, W):
            if p[start] or start in seen:
                continue
            touching += 1
            stack = [start]
            seen.add(start)
            while stack:
                u = stack.pop()
                for v in bg:
                    if v not in seen and adj4(u, v):
                        seen.add(v)
                        stack.append(v)
        table[code] = touching == 1
    return table


POPCOUNT = np.array([bin(c).count("1") for c in range(256)], dtype=np.int64)


def neighbour_codes(img: np.ndarray) -> np.ndarray:
    """Neighbourhood code of every pixel of a zero-padded boolean image."""
    codes = np.zeros(img.shape, dtype=np.int64)
    src = img.astype(np.int64)
    h, w = img.shape
    for k, (dx, dy) in enumerate(RING):
        shifted = np.zeros_like(src)
        xs = slice(max(0, -dx), h - max(0, dx))
        ys = slice(max(0, -dy), w - max(0, dy))
        xd = slice(max(0, dx), h - max(0, -dx))
        yd = slice(max(0, dy), w - max(0, -dy))
        shifted[xs, ys] = src[xd, yd]
        codes |= shifted << k
    return codes


def _code_at(img: np.ndarray, x: int, y: int) -> int:
    code = 0
    for k, (dx, dy) in enumerate(RING):
        if img[x + dx, y + dy]:
            code |= 1 << k
    return code


def _count_components(img: np.ndarray) -> int:
    return ndimage.label(img, structure=EIGHT_CONNECTED)[1]


def _pad(mask) -> np.ndarray:
    return np.pad(check_mask(mask), 1)


def _full_blocks(img: np.ndarray) -> np.ndarray:
    """Pixels that belong to at least one fully set 2x2 block."""
    full = img[:-1, :-1] & img[1:, :-1] & img[:-1, 1:] & img[1:, 1:]
    out = np.zeros_like(img)
    out[:-1, :-1] |= full
    out[1:, :-1] |= full
    out[:-1, 1:] |= full
    out[1:, 1:] |= full
    return out


def _in_full_block(img: np.ndarray, x: int, y: int) -> bool:
    for dx in (-1, 0):
        for dy in (-1, 0):
            if img[x + dx:x + dx + 2, y + dy:y + dy + 2].all():
                return True
    return False


def _clear_blocks(img: np.ndarray) -> bool:
    """Delete simple, non-end pixels of 2x2 blocks one at a time in raster order."""
    simple = simple_lut()
    changed = False
    for x, y in np.argwhere(_full_blocks(img)):
        if not _in_full_block(img, x, y):
            continue
        code = _code_at(img, x, y)
        if simple[code] and POPCOUNT[code] > 1:
            img[x, y] = False
            changed = True
    return changed


def _zhang_suen_passes(img: np.ndarray, n_components: int) -> np.ndarray:
    luts = zhang_suen_luts()
    changed = True
    while changed:
        changed = False
        for lut in luts:
            candidates = img & lut[neighbour_codes(img)]
            if not candidates.any():
                continue
            trial = img & ~candidates
            if _count_components(trial) == n_components:
                img = trial
                changed = True
                continue
            for x, y in np.argwhere(candidates):
                if lut[_code_at(img, x, y)]:
                    img[x, y] = False
                    changed = True
    return img


def thin_fast_parallel(mask) -> np.ndarray:
    """Zhang-Suen two-subiteration thinning until no pixel changes.

    Each subiteration deletes, in parallel, every pixel flagged by its
    lookup table. Parallel deletion erases 2x2 blocks outright; when a
    subiteration would change the number of 8-connected components, its
    candidates are instead re-tested and deleted one at a time in raster
    order, which keeps the topology.

    The lookup tables never touch pixels with seven or more neighbours, so
    on ragged shapes two-pixel-thick staircases can survive. Those are
    cleared by deleting the simple pixels of any remaining 2x2 block, and
    the subiterations resume until neither step changes anything.
    """
    img = _pad(mask)
    n_components = _count_components(img)
    while True:
        img = _zhang_suen_passes(img, n_components)
        if not _clear_blocks(img):
            break
    return img[1:-1, 1:-1]


# Border directions swept by the medial-axis thinning, in order. ``None``
# stands for the two out-of-plane directions of a one-slice volume, for which
# every in-plane border pixel is a border pixel.
SWEEP_DIRECTIONS = (N, S, E, W, None, None)


def thin_medial_axis(mask) -> np.ndarray:
    """Directional sweep thinning with sequential re-checking.

    Every sweep looks at pixels whose neighbour in the sweep direction is
    background; the two out-of-plane sweeps look at every border pixel.
    Those that are simple and are not end points (exactly one neighbour)
    are collected, then deleted one by one in raster order if they are
    still simple. Sweeps repeat until a full round deletes nothing.
    """
    img = _pad(mask)
    simple = simple_lut()
    changed = True
    while changed:
        changed = False
        for direction in SWEEP_DIRECTIONS:
            codes = neighbour_codes(img)
            if direction is None:
                open_side = (codes & FOUR_NEIGHBOURS) != FOUR_NEIGHBOURS
            else:
                open_side = (codes >> direction) & 1 == 0
            candidates = img & open_side & simple[codes] & (POPCOUNT[codes] != 1)
            for x, y in np.argwhere(candidates):
                if simple[_code_at(img, x, y)]:
                    img[x, y] = False
                    changed = True
    return img[1:-1, 1:-1]


def skeletonize(mask, days_since_emergence: int) -> np.ndarray:
    """Parallel thinning through day 10 after emergence, medial-axis thinning afterwards."""
    if int(days_since_emergence) < 1:
        raise InvalidInputError(f"days since emergence must be >= 1, got {days_since_emergence}")
    if days_since_emergence <= FAST_PARALLEL_LAST_DAY:
        return thin_fast_parallel(mask)
    return thin_medial_axis(mask)
