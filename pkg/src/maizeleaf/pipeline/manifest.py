"""Dataset manifests: which image shows which plant, on which day, from which side.

A manifest is a JSON object::

    {
      "root": ".",                       # relative to the manifest file
      "background": "background.png",    # or {"0": "...", "90": "..."}
      "ground_truth": "truth.json",      # optional
      "entries": [
        {"plant_id": "p01", "day": 1, "view": 0, "image": "images/p01_d01_v0.png"},
        ...
      ]
    }

Relative paths are resolved against ``root``.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import ManifestError
from ..hull import View


@dataclass(frozen=True)
class ManifestEntry:
    plant_id: str
    day: int
    view: View
    image: Path


@dataclass(frozen=True)
class Manifest:
    root: Path
    backgrounds: dict[View, Path]
    entries: tuple[ManifestEntry, ...]
    ground_truth: Path | None = None
    missing: tuple[tuple[str, int, View], ...] = field(default_factory=tuple)

    @property
    def plants(self) -> list[str]:
        return sorted({e.plant_id for e in self.entries})

    def days(self, plant_id: str) -> list[int]:
        return sorted({e.day for e in self.entries if e.plant_id == plant_id})

    def lookup(self) -> dict[tuple[str, int, View], ManifestEntry]:
        return {(e.plant_id, e.day, e.view): e for e in self.entries}

    def background(self, view: View) -> Path:
        return self.backgrounds[view]


def _resolve(root: Path, p) -> Path:
    path = Path(p)
    return path if path.is_absolute() else root / path


def _view(value) -> View:
    try:
        if isinstance(value, str) and value.startswith("view"):
            return View(value)
        return View.from_degrees(int(value))
    except (KeyError, ValueError) as exc:
        raise ManifestError(f"view must be 0 or 90, got {value!r}") from exc


def parse_manifest(data: dict, base_dir: Path, check_files: bool = True) -> Manifest:
    if not isinstance(data, dict) or "entries" not in data:
        raise ManifestError("manifest must be an object with an 'entries' list")
    root = _resolve(base_dir, data.get("root", "."))
    bg = data.get("background")
    if bg is None:
        raise ManifestError("manifest has no 'background'")
    if isinstance(bg, dict):
        backgrounds = {_view(k): _resolve(root, v) for k, v in bg.items()}
        if set(backgrounds) != set(View):
            raise ManifestError("per-view backgrounds must cover views 0 and 90")
    else:
        backgrounds = {v: _resolve(root, bg) for v in View}

    entries, seen = [], set()
    for i, raw in enumerate(data["entries"]):
        try:
            entry = ManifestEntry(str(raw["plant_id"]), int(raw["day"]), _view(raw["view"]),
                                  _resolve(root, raw["image"]))
        except KeyError as exc:
            raise ManifestError(f"entry {i} lacks field {exc}") from exc
        except (TypeError, ValueError) as exc:
            raise ManifestError(f"entry {i} is malformed: {exc}") from exc
        if entry.day < 1:
            raise ManifestError(f"entry {i}: day must be >= 1")
        key = (entry.plant_id, entry.day, entry.view)
        if key in seen:
            raise ManifestError(f"duplicate entry for plant {entry.plant_id!r}, day {entry.day}, "
                                f"view {entry.view.degrees}")
        seen.add(key)
        entries.append(entry)

    gt = data.get("ground_truth")
    gt_path = _resolve(root, gt) if gt else None

    if check_files:
        for path in list(backgrounds.values()) + [e.image for e in entries] + ([gt_path] if gt_path else []):
            if not path.is_file():
                raise ManifestError(f"referenced file does not exist: {path}")

    # every plant x day x view slot between the first and last imaged day
    plants = sorted({e.plant_id for e in entries})
    all_days = sorted({e.day for e in entries})
    missing = []
    if all_days:
        for p in plants:
            for d in range(all_days[0], all_days[-1] + 1):
                for v in View:
                    if (p, d, v) not in seen:
                        missing.append((p, d, v))
    entries.sort(key=lambda e: (e.plant_id, e.day, e.view.degrees))
    return Manifest(root, backgrounds, tuple(entries), gt_path, tuple(missing))


def load_manifest(path, check_files: bool = True) -> Manifest:
    p = Path(path)
    if not p.is_file():
        raise ManifestError(f"manifest not found: {p}")
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest is not valid JSON: {exc}") from exc
    return parse_manifest(data, p.parent, check_files)


DEFAULT_PATTERN = r"(?P<plant>[^_/]+)_d(?P<day>\d+)_v(?P<view>0|90)\.png$"


def scan_directory(root, background, pattern: str = DEFAULT_PATTERN, ground_truth=None) -> dict:
    """Build manifest data from image file names matching ``pattern``.

    The pattern needs the named groups ``plant``, ``day`` and ``view``; it is
    matched against each file's path relative to ``root``.
    """
    root = Path(root)
    rx = re.compile(pattern)
    missing_groups = {"plant", "day", "view"} - set(rx.groupindex)
    if missing_groups:
        raise ManifestError(f"pattern lacks named groups {sorted(missing_groups)}")
    entries = []
    for path in sorted(root.rglob("*")):
        if not path.is_file():
            continue
        rel = path.relative_to(root).as_posix()
        m = rx.search(rel)
        if m:
            entries.append({"plant_id": m["plant"], "day": int(m["day"]),
                            "view": int(m["view"]), "image": rel})
    data = {"root": str(root.resolve()), "background": str(background), "entries": entries}
    if ground_truth:
        data["ground_truth"] = str(ground_truth)
    return data
