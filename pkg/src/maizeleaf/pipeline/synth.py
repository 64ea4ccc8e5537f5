"""Stylised maize plants with known leaf topology, for end-to-end testing.

Each plant is a vertical stem standing on a tub rim, with leaves appearing
on alternate sides at a fixed schedule and growing a few pixels a day. The
90 degree view shows the same plant with leaves foreshortened, so the 0
degree view always has the larger hull. A plant can carry one injected
occlusion (a leaf missing from the 0 degree view on one day) and one
injected spur (a short appendage on the stem on one day).

Ground truth lists every leaf of the plant, including the hidden one, with
its attachment point on the stem axis and its tip.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from skimage.draw import polygon

from ..assignment import expected_leaf_range
from ..evaluation import GroundTruth, save_ground_truth
from ..hull import View
from ..raster import save_image

HEIGHT, WIDTH = 420, 320
TUB_ROWS = 24

BACKGROUND_RGB = (0.05, 0.05, 0.06)
PLANT_RGB = (0.20, 0.60, 0.20)
TUB_RGB = (0.80, 0.45, 0.15)

# Days after emergence on which leaves 1..10 appear. Every daily count stays
# inside the plausible range for the plant's age.
LEAF_SCHEDULE = (1, 4, 7, 10, 11, 12, 13, 17, 20, 23)

# Days after emergence where a hidden leaf or an extra spur pushes the count
# out of the plausible range with a clear neighbour consensus.
OCCLUSION_DAYS = (5, 8)
SPUR_DAYS = (13,)

LEAF_GROWTH_PER_DAY = 6.0
NEW_LEAF_LENGTH = 20.0
STEM_HALF_WIDTH = 3
LEAF_HALF_WIDTH = 2.6


@dataclass(frozen=True)
class LeafSpec:
    height: float  # attachment height above the soil line
    side: int  # +1 right, -1 left (in the 0 degree view)
    appears: int  # day after emergence
    max_length: float
    angle: float  # degrees above horizontal
    bend: float  # curvature of the blade, pixels of sideways sag at mid length


@dataclass
class PlantSpec:
    plant_id: str
    emergence_day: int
    stem_y: int
    leaves: list[LeafSpec]
    occlusion_day: int | None = None  # days after emergence
    occluded_leaf: int | None = None
    spur_day: int | None = None
    spur_height: float | None = None
    spur_side: int = 1
    noise: float = 0.01
    seed: int = 0

    def leaf_count(self, d: int) -> int:
        return sum(1 for leaf in self.leaves if leaf.appears <= d)


def make_plant(plant_id: str, rng: np.random.Generator, occlusion=True, spur=True) -> PlantSpec:
    emergence = int(rng.integers(2, 4))
    spacing = float(rng.uniform(23, 26))
    first = float(rng.uniform(18, 24))
    side0 = int(rng.choice([-1, 1]))
    leaves = []
    for k, appears in enumerate(LEAF_SCHEDULE):
        top_factor = 1.0 - 0.05 * max(k - 5, 0)
        leaves.append(LeafSpec(
            height=first + spacing * k,
            side=side0 if k % 2 == 0 else -side0,
            appears=appears,
            max_length=float(rng.uniform(95, 120)) * top_factor,
            angle=float(rng.uniform(28, 40)),
            bend=float(rng.uniform(-4, 4)),
        ))
    spec = PlantSpec(plant_id, emergence, int(WIDTH // 2 + rng.integers(-10, 11)), leaves,
                     seed=int(rng.integers(0, 2**31)))
    if occlusion:
        spec.occlusion_day = int(rng.choice(OCCLUSION_DAYS))
        visible = [k for k, leaf in enumerate(leaves) if leaf.appears <= spec.occlusion_day]
        spec.occluded_leaf = visible[1] if len(visible) >= 2 else visible[0]
    if spur:
        spec.spur_day = int(rng.choice(SPUR_DAYS))
        k = spec.leaf_count(spec.spur_day) - 3  # between two upper leaves
        a, b = leaves[k], leaves[k + 1]
        spec.spur_height = (a.height + b.height) / 2
        spec.spur_side = a.side
    return spec


def _leaf_length(leaf: LeafSpec, d: int) -> float:
    return min(leaf.max_length, NEW_LEAF_LENGTH + LEAF_GROWTH_PER_DAY * (d - leaf.appears))


def _stem_height(spec: PlantSpec, d: int) -> float:
    visible = [leaf.height for leaf in spec.leaves if leaf.appears <= d]
    return max(visible, default=0.0) + 50.0 + min(d, 8) * 3.0


def _soil_x() -> int:
    return HEIGHT - TUB_ROWS - 1


def _blade(base, length, angle_deg, side, bend, lateral_scale):
    """Centre line and outline of a tapered leaf blade."""
    a = math.radians(angle_deg)
    t = np.linspace(0.0, 1.0, max(int(length * 2), 8))
    # straight rise plus a gentle sag towards the tip
    dx = -t * length * math.sin(a) + bend * 4 * t * (1 - t) + 0.12 * length * t ** 2
    dy = side * t * length * math.cos(a) * lateral_scale
    xs = base[0] + dx
    ys = base[1] + dy
    half = LEAF_HALF_WIDTH * (1 - t) ** 0.6 + 0.4
    gx, gy = np.gradient(xs), np.gradient(ys)
    norm = np.hypot(gx, gy) + 1e-9
    nx, ny = -gy / norm, gx / norm
    left = np.c_[xs + nx * half, ys + ny * half]
    right = np.c_[xs - nx * half, ys - ny * half]
    outline = np.vstack([left, right[::-1]])
    return (xs[-1], ys[-1]), outline


def _fill(mask, outline):
    rr, cc = polygon(outline[:, 0], outline[:, 1], mask.shape)
    mask[rr, cc] = True


def plant_mask(spec: PlantSpec, d: int, view: View):
    """Silhouette of the plant on day ``d`` after emergence, plus leaf truth."""
    mask = np.zeros((HEIGHT, WIDTH), dtype=bool)
    truth = []
    if d < 1:
        return mask, truth
    soil = _soil_x()
    lateral = 1.0 if view is View.VIEW0 else 0.45
    top = soil - _stem_height(spec, d)
    # stem: tapered towards the top
    xs = np.arange(int(top), soil + 1)
    for x in xs:
        frac = (soil - x) / max(soil - top, 1)
        hw = STEM_HALF_WIDTH if frac < 0.85 else max(0, round(STEM_HALF_WIDTH * (1 - frac) / 0.15))
        mask[x, spec.stem_y - hw: spec.stem_y + hw + 1] = True
    for k, leaf in enumerate(spec.leaves):
        if leaf.appears > d:
            continue
        base = (soil - leaf.height, spec.stem_y)
        tip, outline = _blade(base, _leaf_length(leaf, d), leaf.angle, leaf.side, leaf.bend, lateral)
        tip = (int(round(tip[0])), int(round(tip[1])))
        truth.append((k, (int(round(base[0])), int(base[1])), tip))
        hidden = view is View.VIEW0 and d == spec.occlusion_day and k == spec.occluded_leaf
        if not hidden:
            _fill(mask, outline)
    if d == spec.spur_day and view is View.VIEW0:
        base = (soil - spec.spur_height, spec.stem_y)
        _, outline = _blade(base, 16.0, 20.0, spec.spur_side, 0.0, 1.0)
        _fill(mask, outline)
    return mask, truth


def render(spec: PlantSpec, calendar_day: int, view: View, rng: np.random.Generator) -> np.ndarray:
    d = calendar_day - spec.emergence_day + 1
    img = np.empty((HEIGHT, WIDTH, 3))
    img[:] = BACKGROUND_RGB
    img[HEIGHT - TUB_ROWS:, :] = TUB_RGB
    mask, _ = plant_mask(spec, d, view)
    img[mask] = PLANT_RGB
    img += rng.normal(0.0, spec.noise, img.shape)
    return np.clip(img, 0.0, 1.0)


def background() -> np.ndarray:
    img = np.empty((HEIGHT, WIDTH, 3))
    img[:] = BACKGROUND_RGB
    return img


def ground_truth(spec: PlantSpec, calendar_day: int) -> GroundTruth:
    d = calendar_day - spec.emergence_day + 1
    _, leaves = plant_mask(spec, d, View.VIEW0)
    positions = [(b, t) for _, b, t in leaves]
    n = len(positions)
    return GroundTruth(spec.plant_id, calendar_day, {View.VIEW0: n, View.VIEW90: n},
                       {View.VIEW0: positions})


def check_schedule(spec: PlantSpec, days: int) -> None:
    """Every uninjected day must sit inside the plausible leaf-count range."""
    for day in range(spec.emergence_day, days + 1):
        d = day - spec.emergence_day + 1
        lo, hi = expected_leaf_range(d)
        n = spec.leaf_count(d)
        if not lo <= n <= hi:
            raise AssertionError(f"schedule puts {n} leaves on day {d}, outside [{lo}, {hi}]")


def write_dataset(out_dir, n_plants: int = 5, n_days: int = 27, seed: int = 0,
                  occlusion: bool = True, spur: bool = True) -> Path:
    """Render a synthetic dataset; returns the manifest path."""
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    save_image(out / "background.png", background())
    entries, truth, plants = [], {}, []
    for i in range(n_plants):
        spec = make_plant(f"plant{i + 1:02d}", rng, occlusion, spur)
        check_schedule(spec, n_days)
        noise_rng = np.random.default_rng(spec.seed)
        for day in range(1, n_days + 1):
            for view in View:
                name = f"{spec.plant_id}_d{day:02d}_v{view.degrees}.png"
                save_image(out / "images" / name, render(spec, day, view, noise_rng))
                entries.append({"plant_id": spec.plant_id, "day": day, "view": view.degrees,
                                "image": f"images/{name}"})
            truth[(spec.plant_id, day)] = ground_truth(spec, day)
        plants.append({
            "plant_id": spec.plant_id,
            "emergence_day": spec.emergence_day,
            "occlusion_day": None if spec.occlusion_day is None else spec.occlusion_day + spec.emergence_day - 1,
            "spur_day": None if spec.spur_day is None else spec.spur_day + spec.emergence_day - 1,
        })
    save_ground_truth(out / "truth.json", truth)
    manifest = {"root": ".", "background": "background.png", "ground_truth": "truth.json",
                "entries": entries}
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=1))
    (out / "plants.json").write_text(json.dumps(plants, indent=1))
    return path
