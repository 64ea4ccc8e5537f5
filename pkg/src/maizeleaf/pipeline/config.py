"""Pipeline configuration: every threshold in one versioned JSON document."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

from ..assignment import ReconcileParams
from ..dse import DseParams
from ..errors import InvalidInputError
from ..evaluation import DEFAULT_TOLERANCE, MAX_ACROSS_VIEWS, SELECTED_VIEW
from ..heuristics import HeuristicParams
from ..raster import SegmentationParams

CONFIG_VERSION = 1


@dataclass(frozen=True)
class PipelineConfig:
    segmentation: SegmentationParams = field(default_factory=SegmentationParams)
    dse: DseParams = field(default_factory=DseParams)
    heuristics: HeuristicParams = field(default_factory=HeuristicParams)
    reconcile: ReconcileParams = field(default_factory=ReconcileParams)
    min_emergence_area: int = 500
    match_tolerance: float = DEFAULT_TOLERANCE
    truth_mode: str = MAX_ACROSS_VIEWS
    version: int = CONFIG_VERSION

    def __post_init__(self):
        if self.min_emergence_area < 1:
            raise InvalidInputError("min_emergence_area must be positive")
        if self.truth_mode not in (MAX_ACROSS_VIEWS, SELECTED_VIEW):
            raise InvalidInputError(f"unknown truth_mode {self.truth_mode!r}")

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "segmentation": asdict(self.segmentation),
            "dse": asdict(self.dse),
            "heuristics": self.heuristics.to_dict(),
            "reconcile": asdict(self.reconcile),
            "min_emergence_area": self.min_emergence_area,
            "match_tolerance": self.match_tolerance,
            "truth_mode": self.truth_mode,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        known = {"version", "segmentation", "dse", "heuristics", "reconcile",
                 "min_emergence_area", "match_tolerance", "truth_mode"}
        unknown = set(d) - known
        if unknown:
            raise InvalidInputError(f"unknown config keys: {sorted(unknown)}")
        if d.get("version", CONFIG_VERSION) != CONFIG_VERSION:
            raise InvalidInputError(f"unsupported config version {d.get('version')}")
        try:
            return cls(
                segmentation=SegmentationParams(**d.get("segmentation", {})),
                dse=DseParams(**d.get("dse", {})),
                heuristics=HeuristicParams(**d.get("heuristics", {})),
                reconcile=ReconcileParams(**d.get("reconcile", {})),
                min_emergence_area=int(d.get("min_emergence_area", 500)),
                match_tolerance=float(d.get("match_tolerance", DEFAULT_TOLERANCE)),
                truth_mode=d.get("truth_mode", MAX_ACROSS_VIEWS),
            )
        except TypeError as exc:  # unknown parameter inside a section
            raise InvalidInputError(str(exc)) from exc

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()[:16]


def default_config_path():
    return resources.files(__package__).joinpath("default_config.json")


def load_config(path=None) -> PipelineConfig:
    """Read a config file; without a path, the packaged defaults."""
    if path is None:
        text = default_config_path().read_text()
    else:
        p = Path(path)
        if not p.is_file():
            raise InvalidInputError(f"config file not found: {p}")
        text = p.read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"config is not valid JSON: {exc}") from exc
    return PipelineConfig.from_dict(data)
