"""Leaf detection metrics: confusion counts, precision/recall and count losses.

Ground truth for a plant-day is the larger of the two per-view leaf counts,
since a leaf hidden in one view is usually visible in the other. When leaf
positions are annotated for the view a detection came from, detections are
matched to annotations greedily by tip distance; otherwise the counts alone
are compared.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidInputError
from .hull import View
from .records import DELETED, INSERTED, PlantDayRecord, PlantTimeline

DEFAULT_TOLERANCE = 20.0

MAX_ACROSS_VIEWS = "max_across_views"
SELECTED_VIEW = "selected_view"

Key = tuple[str, int]


@dataclass(frozen=True)
class GroundTruth:
    plant_id: str
    day: int
    counts: dict[View, int]
    # per view: list of (branch, tip) leaf annotations
    positions: dict[View, list[tuple[tuple[int, int], tuple[int, int]]]] = field(default_factory=dict)

    def __post_init__(self):
        if any(c < 0 for c in self.counts.values()):
            raise InvalidInputError("leaf counts must be non-negative")

    @property
    def ground_truth_count(self) -> int:
        return max(self.counts.values(), default=0)

    def count_for(self, view: View | None, mode: str = MAX_ACROSS_VIEWS) -> int:
        if mode == SELECTED_VIEW and view in self.counts:
            return self.counts[view]
        return self.ground_truth_count

    def to_dict(self) -> dict:
        return {
            "plant_id": self.plant_id,
            "day": self.day,
            "counts": {v.value: c for v, c in self.counts.items()},
            "positions": {v.value: [[list(b), list(t)] for b, t in ps] for v, ps in self.positions.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GroundTruth":
        def pt(p):
            return int(p[0]), int(p[1])

        return cls(
            str(d["plant_id"]), int(d["day"]),
            {View(v): int(c) for v, c in d.get("counts", {}).items()},
            {View(v): [(pt(b), pt(t)) for b, t in ps] for v, ps in d.get("positions", {}).items()},
        )


def load_ground_truth(path) -> dict[Key, GroundTruth]:
    data = json.loads(Path(path).read_text())
    items = data["entries"] if isinstance(data, dict) else data
    out = {}
    for d in items:
        gt = GroundTruth.from_dict(d)
        out[(gt.plant_id, gt.day)] = gt
    return out


def save_ground_truth(path, truth: dict[Key, GroundTruth]) -> None:
    entries = [truth[k].to_dict() for k in sorted(truth)]
    Path(path).write_text(json.dumps({"entries": entries}, indent=1))


@dataclass(frozen=True)
class Confusion:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def __add__(self, other: "Confusion") -> "Confusion":
        return Confusion(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)


def count_confusion(detected: int, truth: int) -> Confusion:
    return Confusion(min(detected, truth), max(detected - truth, 0), max(truth - detected, 0))


def positional_confusion(leaves, annotations, truth_count: int, tolerance: float) -> Confusion:
    """Greedy nearest-first matching of detected tips to annotated tips.

    Each annotation is consumed at most once. Detections without a position
    (count-only occlusion recoveries) take up leftover annotations as true
    positives; anything still unmatched is a false positive.
    """
    placed = [c for c in leaves if c.tip is not None]
    unplaced = len(leaves) - len(placed)
    pairs = sorted(
        (math.dist(c.tip, tip), i, j)
        for i, c in enumerate(placed)
        for j, (_, tip) in enumerate(annotations)
    )
    used_d, used_a = set(), set()
    for dist, i, j in pairs:
        if dist > tolerance:
            break
        if i in used_d or j in used_a:
            continue
        used_d.add(i)
        used_a.add(j)
    tp = len(used_d)
    spare = max(truth_count - tp, 0)
    filled = min(unplaced, spare)
    tp += filled
    fp = (len(placed) - len(used_d)) + (unplaced - filled)
    return Confusion(tp, fp, max(truth_count - tp, 0))


def _leaves_and_view(det):
    if isinstance(det, PlantDayRecord):
        return list(det.leaves), det.view
    return list(det), None


def confusion_counts(detections: dict, truth: dict[Key, GroundTruth],
                     tolerance: float = DEFAULT_TOLERANCE, mode: str = MAX_ACROSS_VIEWS) -> Confusion:
    """Total TP/FP/FN over plant-days.

    ``detections`` maps ``(plant_id, day)`` to a :class:`PlantDayRecord` or a
    plain list of leaf candidates; it must cover exactly the keys of ``truth``.
    """
    if set(detections) != set(truth):
        missing = sorted(set(truth) - set(detections))[:3]
        extra = sorted(set(detections) - set(truth))[:3]
        raise InvalidInputError(f"detections and truth cover different plant-days "
                                f"(missing {missing}, extra {extra})")
    total = Confusion()
    for key in sorted(truth):
        leaves, view = _leaves_and_view(detections[key])
        gt = truth[key]
        n_true = gt.count_for(view, mode)
        if view is not None and view in gt.positions and math.isfinite(tolerance):
            total += positional_confusion(leaves, gt.positions[view], n_true, tolerance)
        else:
            total += count_confusion(len(leaves), n_true)
    return total


def precision_recall(tp: int, fp: int, fn: int) -> tuple[float | None, float | None]:
    """``(TP / (TP + FP), TP / (TP + FN))``; ``None`` where a denominator is zero."""
    if min(tp, fp, fn) < 0:
        raise InvalidInputError("confusion counts must be non-negative")
    precision = tp / (tp + fp) if tp + fp > 0 else None
    recall = tp / (tp + fn) if tp + fn > 0 else None
    return precision, recall


def absolute_loss_stats(predicted, truth) -> tuple[float, float]:
    """Mean and population standard deviation of per-image absolute count errors."""
    p = np.asarray(predicted, dtype=float)
    t = np.asarray(truth, dtype=float)
    if p.shape != t.shape or p.ndim != 1:
        raise InvalidInputError(f"need equal-length count lists, got {p.shape} and {t.shape}")
    if p.size == 0:
        raise InvalidInputError("no images to compare")
    loss = np.abs(p - t)
    return float(loss.mean()), float(loss.std(ddof=0))


@dataclass
class MetricsReport:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    precision: float | None = None
    recall: float | None = None
    mean_abs_loss: float | None = None
    abs_loss_std: float | None = None
    n_plant_days: int = 0
    count_matches: int = 0
    metadata: dict = field(default_factory=dict)
    per_plant: list[dict] = field(default_factory=list)

    @property
    def count_match_rate(self) -> float | None:
        return self.count_matches / self.n_plant_days if self.n_plant_days else None

    def summary(self) -> dict:
        d = asdict(self)
        d.pop("per_plant")
        d["positive"] = self.tp + self.fn
        d["count_match_rate"] = self.count_match_rate
        return d


def _phase_counts(rec: PlantDayRecord) -> dict[str, int]:
    """Leaf counts after skeleton extraction, after pruning and after reconciliation."""
    inserted = sum(1 for a in rec.audit if a.stage == "reconcile" and a.action == INSERTED)
    deleted = sum(1 for a in rec.audit if a.stage == "reconcile" and a.action == DELETED)
    return {
        "skeleton": rec.initial_count,
        "pruned": rec.count - inserted + deleted,
        "final": rec.count,
    }


def evaluate_timelines(timelines, truth: dict[Key, GroundTruth], tolerance: float = DEFAULT_TOLERANCE,
                       mode: str = MAX_ACROSS_VIEWS) -> MetricsReport:
    """Score emerged plant-days that have ground truth."""
    detections = {}
    predicted, actual = [], []
    per_plant = []
    matches = 0
    for tl in timelines:
        row = {"plant_id": tl.plant_id}
        phases = {"skeleton": Confusion(), "pruned": Confusion(), "final": Confusion()}
        for rec in tl.records:
            key = (rec.plant_id, rec.day)
            if key not in truth or not rec.emerged:
                continue
            detections[key] = rec
            n_true = truth[key].count_for(rec.view, mode)
            predicted.append(rec.count)
            actual.append(n_true)
            matches += rec.count == n_true
            for phase, n in _phase_counts(rec).items():
                phases[phase] += count_confusion(n, n_true)
        for phase, c in phases.items():
            row[f"{phase}_true_leaves"] = c.tp
            row[f"{phase}_false_leaves"] = c.fp
        row["truth_leaves"] = phases["final"].tp + phases["final"].fn
        per_plant.append(row)

    scored = {k: v for k, v in truth.items() if k in detections}
    conf = confusion_counts(detections, scored, tolerance, mode)
    precision, recall = precision_recall(conf.tp, conf.fp, conf.fn)
    report = MetricsReport(conf.tp, conf.fp, conf.fn, precision, recall,
                           n_plant_days=len(predicted), count_matches=matches, per_plant=per_plant)
    if predicted:
        report.mean_abs_loss, report.abs_loss_std = absolute_loss_stats(predicted, actual)
    report.metadata = {"tolerance": tolerance, "truth": mode, "std": "population"}
    return report


def write_metrics(report: MetricsReport, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.json").write_text(json.dumps(report.summary(), indent=1, sort_keys=True))
    if report.per_plant:
        fields = list(report.per_plant[0])
        with open(out / "metrics.csv", "w", newline="") as f:
            w = csv.DictWriter(f, fieldnames=fields)
            w.writeheader()
            w.writerows(report.per_plant)
    else:
        (out / "metrics.csv").write_text("plant_id\n")
