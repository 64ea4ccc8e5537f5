"""Overlay rendering of detections on the plant image."""

from __future__ import annotations

import numpy as np
from skimage.draw import circle_perimeter, disk, line, rectangle

from ..errors import InvalidInputError
from ..raster import check_raster
from ..records import PlantDayRecord
from ..skeleton.graph import BRANCH, ENDPOINT
from ..skeleton.plant import Label

SKELETON_RGB = (1.0, 1.0, 1.0)
LEAF_RGB = (1.0, 0.85, 0.0)
BRANCH_RGB = (0.0, 0.45, 1.0)
ENDPOINT_RGB = (1.0, 0.0, 0.0)
OCCLUDED_RGB = (1.0, 0.0, 1.0)
SPUR_RGB = (0.0, 1.0, 1.0)


def _paint(img, rr, cc, rgb):
    h, w = img.shape[:2]
    keep = (rr >= 0) & (rr < h) & (cc >= 0) & (cc < w)
    img[rr[keep], cc[keep]] = rgb


def _dashed_ring(img, center, radius, rgb):
    rr, cc = circle_perimeter(int(center[0]), int(center[1]), radius, shape=img.shape[:2])
    angles = np.arctan2(rr - center[0], cc - center[1])
    on = (np.floor((angles + np.pi) / (np.pi / 6)) % 2) == 0
    _paint(img, rr[on], cc[on], rgb)


def render_overlay(record: PlantDayRecord, base) -> np.ndarray:
    """Base image with skeleton, leaves, nodes and occlusion markers drawn on top.

    Skeleton pixels are white, leaf chains yellow, branch nodes blue squares,
    end points red dots, removed spurs cyan and occluded leaves dashed
    magenta rings (with a line from branch to tip when positions are known).
    """
    img = check_raster(base)
    if img.ndim == 2:
        img = np.repeat(img[..., None], 3, axis=2)
    img = img.copy()
    h, w = img.shape[:2]
    g = record.skeleton
    if g is not None:
        if g.shape != (h, w):
            raise InvalidInputError(f"skeleton {g.shape} does not fit image {(h, w)}")
        img[g.mask] = SKELETON_RGB
    for leaf in record.leaves:
        if leaf.label is Label.OCCLUDED:
            continue
        for x, y in leaf.chain:
            img[x, y] = LEAF_RGB
    for spur in record.rejected:
        for x, y in spur.chain:
            img[x, y] = SPUR_RGB
    if g is not None:
        for n in g.nodes:
            x, y = n.position
            if n.kind == BRANCH:
                rr, cc = rectangle((x - 2, y - 2), (x + 2, y + 2), shape=(h, w))
                _paint(img, rr.ravel(), cc.ravel(), BRANCH_RGB)
            elif n.kind == ENDPOINT:
                rr, cc = disk((x, y), 2.5, shape=(h, w))
                _paint(img, rr, cc, ENDPOINT_RGB)
    for leaf in record.leaves:
        if leaf.label is not Label.OCCLUDED:
            continue
        if leaf.has_position:
            rr, cc = line(*leaf.branch, *leaf.tip)
            on = (np.arange(rr.size) // 3) % 2 == 0
            _paint(img, rr[on], cc[on], OCCLUDED_RGB)
            _dashed_ring(img, leaf.tip, 6, OCCLUDED_RGB)
        else:
            _dashed_ring(img, (8, w - 9), 6, OCCLUDED_RGB)
    return img
