"""Image representation and two-stage plant segmentation.

Images are plain numpy arrays with intensities normalized to ``[0, 1]``:
``(H, W)`` for grayscale and ``(H, W, 3)`` for RGB. Binary masks are
``(H, W)`` boolean arrays. Pixel coordinates are ``(x, y)`` with the origin
at the upper-left corner, ``x`` running down the rows and ``y`` along the
columns, so ``image[x, y]`` is the pixel at ``(x, y)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import InvalidInputError

# Rec. 601 luma weights.
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])

N_BINS = 256
EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class SegmentationParams:
    stage1_floor: float = 0.27
    stage2_floor: float = 0.1
    stage2_cap: float = 0.5
    keep_largest_component: bool = True

    def __post_init__(self):
        if not 0.0 <= self.stage1_floor <= 1.0:
            raise InvalidInputError(f"stage1_floor out of [0, 1]: {self.stage1_floor}")
        if not 0.0 <= self.stage2_floor < self.stage2_cap <= 1.0:
            raise InvalidInputError(
                f"need 0 <= stage2_floor < stage2_cap <= 1, got "
                f"{self.stage2_floor}, {self.stage2_cap}"
            )


class OtsuResult(NamedTuple):
    threshold: float
    degenerate: bool


def check_raster(img, channels=None) -> np.ndarray:
    """Validate a raster and return it as a float array."""
    arr = np.asarray(img, dtype=float)
    if arr.ndim not in (2, 3) or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise InvalidInputError(f"raster must be (H, W) or (H, W, 3), got shape {arr.shape}")
    n_channels = 1 if arr.ndim == 2 else arr.shape[2]
    if arr.ndim == 3 and n_channels not in (1, 3):
        raise InvalidInputError(f"raster must have 1 or 3 channels, got {n_channels}")
    if channels is not None and n_channels != channels:
        raise InvalidInputError(f"expected {channels} channel(s), got {n_channels}")
    if arr.size and (np.nanmin(arr) < 0.0 or np.nanmax(arr) > 1.0 or np.isnan(arr).any()):
        raise InvalidInputError("raster intensities must lie in [0, 1]")
    return arr


def check_mask(mask) -> np.ndarray:
    arr = np.asarray(mask)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise InvalidInputError(f"mask must be a non-empty 2-D array, got shape {arr.shape}")
    return arr.astype(bool)


def from_uint8(arr) -> np.ndarray:
    return np.asarray(arr, dtype=float) / 255.0


def to_uint8(img) -> np.ndarray:
    return np.clip(np.rint(np.asarray(img, dtype=float) * 255.0), 0, 255).astype(np.uint8)


def load_image(path) -> np.ndarray:
    """Read an 8-bit RGB image as a float ``(H, W, 3)`` raster."""
    with Image.open(path) as im:
        return from_uint8(np.asarray(im.convert("RGB")))


def save_image(path, img) -> None:
    Image.fromarray(to_uint8(img)).save(Path(path))


def load_mask(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("L")) > 127


def save_mask(path, mask) -> None:
    Image.fromarray(np.where(check_mask(mask), 255, 0).astype(np.uint8)).save(Path(path))


def area(mask) -> int:
    return int(np.count_nonzero(mask))


def to_grayscale(img) -> np.ndarray:
    """Luminance of an RGB raster using fixed Rec. 601 weights."""
    rgb = check_raster(img, channels=3)
    return np.clip(rgb @ LUMA_WEIGHTS, 0.0, 1.0)


def subtract_background(img, bg) -> np.ndarray:
    """Per-pixel, per-channel absolute difference between an image and its background."""
    a = check_raster(img)
    b = check_raster(bg)
    if a.shape != b.shape:
        raise InvalidInputError(f"image {a.shape} and background {b.shape} differ in shape")
    return np.clip(np.abs(a - b), 0.0, 1.0)


def excess_green(img) -> np.ndarray:
    """``2G - R - B`` clamped to ``[0, 1]``."""
    rgb = check_raster(img, channels=3)
    exg = 2.0 * rgb[..., 1] - rgb[..., 0] - rgb[..., 2]
    return np.clip(exg, 0.0, 1.0)


def histogram256(values) -> np.ndarray:
    """256-bin histogram of intensities in ``[0, 1]``; bin ``k`` holds ``round(255 * v) == k``."""
    bins = np.clip(np.rint(np.asarray(values, dtype=float).ravel() * 255.0), 0, 255).astype(int)
    return np.bincount(bins, minlength=N_BINS)


def otsu_threshold(data) -> OtsuResult:
    """Otsu threshold over a 256-bin histogram.

    ``data`` is either a grayscale raster / array of intensities, or a
    histogram of exactly 256 integer counts (pass it as a 1-D integer array
    of length 256 together with nothing else). The returned threshold ``t``
    splits the bins into ``<= t`` and ``> t``; as an intensity it is
    ``bin / 255``, so ``values > threshold`` selects the upper class.

    Between-class variance is compared exactly with integer arithmetic and
    the smallest maximizing bin wins ties. A histogram with fewer than two
    occupied bins yields threshold 0 with ``degenerate=True``.
    """
    hist = _as_histogram(data)
    total = int(hist.sum())
    if total == 0:
        raise InvalidInputError("Otsu threshold of an empty image")
    if np.count_nonzero(hist) < 2:
        return OtsuResult(0.0, True)

    counts = np.cumsum(hist).tolist()
    moments = np.cumsum(hist * np.arange(N_BINS)).tolist()
    total_moment = moments[-1]

    best_bin, best_num, best_den = 0, -1, 1
    for t in range(N_BINS - 1):
        n0 = counts[t]
        n1 = total - n0
        if n0 == 0 or n1 == 0:
            continue
        # between-class variance * total**2 == (total*m0 - n0*M)**2 / (n0*n1)
        num = (total * moments[t] - n0 * total_moment) ** 2
        den = n0 * n1
        if num * best_den > best_num * den:
            best_bin, best_num, best_den = t, num, den
    return OtsuResult(best_bin / 255.0, False)


def _as_histogram(data) -> np.ndarray:
    arr = np.asarray(data)
    if arr.ndim == 1 and arr.shape[0] == N_BINS and np.issubdtype(arr.dtype, np.integer):
        if (arr < 0).any():
            raise InvalidInputError("histogram counts must be non-negative")
        return arr.astype(np.int64)
    if arr.size == 0:
        raise InvalidInputError("Otsu threshold of an empty image")
    return histogram256(check_raster(arr) if arr.ndim >= 2 else arr)


def largest_component(mask) -> np.ndarray:
    """Keep only the largest 8-connected foreground component (ties: first label)."""
    mask = check_mask(mask)
    labels, n = ndimage.label(mask, structure=EIGHT_CONNECTED)
    if n <= 1:
        return mask
    sizes = np.bincount(labels.ravel())[1:]
    return labels == (int(np.argmax(sizes)) + 1)


@dataclass(frozen=True)
class SegmentationTrace:
    """Intermediate products of :func:`segment_plant`, kept for inspection."""

    stage1_mask: np.ndarray
    stage1_threshold: float
    stage2_threshold: float
    stage1_otsu: OtsuResult
    stage2_otsu: OtsuResult | None
    mask: np.ndarray


def segment_plant(img, bg, params: SegmentationParams | None = None) -> np.ndarray:
    return segment_plant_traced(img, bg, params).mask


def segment_plant_traced(img, bg, params: SegmentationParams | None = None) -> SegmentationTrace:
    """Two-stage threshold segmentation of a plant image against its background.

    Stage one thresholds the luminance of the background difference at the
    larger of ``stage1_floor`` and its Otsu threshold. Stage two thresholds
    the excess green of the difference, restricted to the stage-one pixels,
    at ``max(stage2_floor, min(otsu, stage2_cap))``.
    """
    params = params or SegmentationParams()
    rgb = check_raster(img, channels=3)
    fg = subtract_background(rgb, check_raster(bg, channels=3))

    gray = to_grayscale(fg)
    otsu1 = otsu_threshold(gray)
    t1 = max(params.stage1_floor, otsu1.threshold)
    mask1 = gray > t1

    exg = excess_green(fg)
    if mask1.any():
        otsu2 = otsu_threshold(exg[mask1])
        t2 = max(params.stage2_floor, min(otsu2.threshold, params.stage2_cap))
    else:
        otsu2 = None
        t2 = params.stage2_floor
    mask = mask1 & (exg > t2)
    if params.keep_largest_component:
        mask = largest_component(mask)
    return SegmentationTrace(mask1, t1, t2, otsu1, otsu2, mask)
