"""Per-plant and per-dataset orchestration of the detection pipeline.

For every imaged day of a plant both views are segmented, the view with
the larger hull is skeletonized (the algorithm depends on the days since
emergence), the skeleton graph is pruned and filtered by the maize rules,
and leaf candidates are read off the stem. When all days of a plant are
done, the timeline is reconciled.

With an output directory, every stage writes its products under
``stages/<stage>/`` and a resumed run reuses whatever is already there.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..assignment import reconcile_timeline
from ..dse import dse_prune
from ..errors import MalformedSkeletonError
from ..evaluation import MetricsReport, evaluate_timelines, load_ground_truth, write_metrics
from ..heuristics import apply_heuristics_staged
from ..hull import View, select_view
from ..raster import load_image, load_mask, save_image, save_mask, segment_plant
from ..records import DELETED, INSERTED, AuditEntry, PlantDayRecord, PlantTimeline
from ..skeleton.graph import SkeletonGraph, extract_graph
from ..skeleton.plant import LeafCandidate, identify_stem_and_leaves
from ..skeleton.thinning import skeletonize
from .config import PipelineConfig
from .manifest import Manifest
from .overlay import render_overlay

log = logging.getLogger(__name__)

DSE_STAGE = "dse"


# --- emergence ----------------------------------------------------------------


def emergence_from_areas(areas, days=None, min_area: int = 500) -> int | None:
    """First day whose plant area reaches ``min_area``; days default to 1, 2, ..."""
    areas = list(areas)
    days = list(days) if days is not None else list(range(1, len(areas) + 1))
    for day, a in zip(days, areas):
        if a >= min_area:
            return day
    return None


def detect_emergence(masks, days=None, min_area: int = 500) -> int | None:
    """First day whose segmented mask has a large enough plant (largest component)."""
    from ..raster import largest_component

    areas = [int(np.count_nonzero(largest_component(m))) for m in masks]
    return emergence_from_areas(areas, days, min_area)


# --- single day ---------------------------------------------------------------


def _leaves(g: SkeletonGraph) -> tuple[LeafCandidate, ...]:
    if not g.endpoints:
        return ()
    try:
        return identify_stem_and_leaves(g).candidates
    except MalformedSkeletonError:
        return ()


def _diff(stage: str, before, after) -> list[AuditEntry]:
    old = {c.tip: c for c in before}
    new = {c.tip: c for c in after}
    out = [AuditEntry(stage, DELETED, t, old[t].branch) for t in sorted(set(old) - set(new))]
    out += [AuditEntry(stage, INSERTED, t, new[t].branch) for t in sorted(set(new) - set(old))]
    return out


def detect_leaves(mask, days_since_emergence: int, config: PipelineConfig | None = None):
    """Skeletonize a plant mask and return (final graph, leaves, initial count, audit)."""
    config = config or PipelineConfig()
    skel = skeletonize(mask, days_since_emergence)
    g = extract_graph(skel)
    leaves = _leaves(g)
    initial = len(leaves)
    audit = []
    g2 = dse_prune(g, config.dse)
    after = _leaves(g2)
    audit += _diff(DSE_STAGE, leaves, after)
    leaves, g = after, g2
    for rule, g2, _ in apply_heuristics_staged(g, mask, days_since_emergence, config.heuristics):
        after = _leaves(g2)
        audit += _diff(rule, leaves, after)
        leaves, g = after, g2
    return g, leaves, initial, audit


def detect_day(images: dict[View, np.ndarray], backgrounds: dict[View, np.ndarray], plant_id: str,
               day: int, days_since_emergence: int, config: PipelineConfig | None = None):
    """Segment both views, pick one and detect its leaves. Returns (record, masks)."""
    config = config or PipelineConfig()
    masks = {v: segment_plant(images[v], backgrounds[v], config.segmentation) for v in images}
    record = record_from_masks(masks, plant_id, day, days_since_emergence, config)
    return record, masks


def record_from_masks(masks: dict[View, np.ndarray], plant_id: str, day: int,
                      days_since_emergence: int, config: PipelineConfig) -> PlantDayRecord:
    if len(masks) == 2:
        view = select_view(masks[View.VIEW0], masks[View.VIEW90]).view
    else:
        (view,) = masks
    g, leaves, initial, audit = detect_leaves(masks[view], days_since_emergence, config)
    return PlantDayRecord(plant_id, day, days_since_emergence, view, tuple(leaves), g,
                          tuple(audit), initial)


# --- one plant ----------------------------------------------------------------


@dataclass
class PlantResult:
    timeline: PlantTimeline
    emergence_day: int | None
    problems: list[str] = field(default_factory=list)


class _Stages:
    """Stage-named output folders, or nothing at all without an output directory."""

    def __init__(self, out_dir, resume: bool):
        self.root = Path(out_dir) / "stages" if out_dir is not None else None
        self.resume = resume

    def path(self, stage: str, name: str) -> Path | None:
        if self.root is None:
            return None
        p = self.root / stage / name
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def cached(self, stage: str, name: str) -> Path | None:
        p = self.path(stage, name)
        return p if p is not None and self.resume and p.is_file() else None


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def run_plant(manifest: Manifest, plant_id: str, config: PipelineConfig | None = None,
              out_dir=None, resume: bool = False) -> PlantResult:
    """Run every stage for one plant and reconcile its timeline."""
    config = config or PipelineConfig()
    stages = _Stages(out_dir, resume)
    lookup = manifest.lookup()
    days = manifest.days(plant_id)
    if not days:
        raise KeyError(f"plant {plant_id!r} is not in the manifest")
    backgrounds: dict[View, np.ndarray] = {}
    problems: list[str] = []

    masks_by_day: dict[int, dict[View, np.ndarray]] = {}
    for day in days:
        masks = {}
        for view in View:
            entry = lookup.get((plant_id, day, view))
            if entry is None:
                continue
            name = f"{plant_id}/d{day:03d}_v{view.degrees}.png"
            hit = stages.cached("segment", name)
            try:
                if hit is not None:
                    masks[view] = load_mask(hit)
                    continue
                if view not in backgrounds:
                    backgrounds[view] = load_image(manifest.background(view))
                mask = segment_plant(load_image(entry.image), backgrounds[view], config.segmentation)
            except Exception as exc:  # unreadable or malformed image
                problems.append(f"{plant_id} day {day} view {view.degrees}: {exc}")
                log.warning("skipping %s day %d view %d: %s", plant_id, day, view.degrees, exc)
                continue
            masks[view] = mask
            target = stages.path("segment", name)
            if target is not None:
                save_mask(target, mask)
        masks_by_day[day] = masks

    imaged = [d for d in days if masks_by_day[d]]
    areas = [max(int(m.sum()) for m in masks_by_day[d].values()) for d in imaged]
    emergence = emergence_from_areas(areas, imaged, config.min_emergence_area)
    if emergence is None:
        problems.append(f"{plant_id}: no day reaches the emergence area; plant skipped")

    records = []
    for day in days:
        masks = masks_by_day[day]
        if not masks:
            records.append(PlantDayRecord(plant_id, day, None, None, status="absent",
                                          error="no readable image"))
            continue
        if emergence is None or day < emergence:
            records.append(PlantDayRecord(plant_id, day, None, None, status="not_emerged"))
            continue
        dse_day = day - emergence + 1
        name = f"{plant_id}/d{day:03d}.json"
        hit = stages.cached("detect", name)
        if hit is not None:
            records.append(PlantDayRecord.from_dict(json.loads(hit.read_text())))
            continue
        try:
            rec = record_from_masks(masks, plant_id, day, dse_day, config)
        except Exception as exc:
            problems.append(f"{plant_id} day {day}: {exc}")
            log.exception("detection failed for %s day %d", plant_id, day)
            rec = PlantDayRecord(plant_id, day, dse_day, None, status="failed", error=str(exc))
        target = stages.path("detect", name)
        if target is not None:
            target.write_text(_dumps(rec.to_dict(include_skeleton=True)))
            if rec.skeleton is not None:
                save_mask(stages.path("skeleton", f"{plant_id}/d{day:03d}.png"), rec.skeleton.mask)
        records.append(rec)

    timeline = PlantTimeline(plant_id, tuple(records))
    hit = stages.cached("reconcile", f"{plant_id}.json")
    if hit is not None:
        final = PlantTimeline.from_dict(json.loads(hit.read_text()))
        # skeletons are kept only with the detection stage
        skel = {r.day: r.skeleton for r in records}
        final = replace(final, records=tuple(replace(r, skeleton=skel.get(r.day)) for r in final.records))
    else:
        final = reconcile_timeline(timeline, config.reconcile)
        target = stages.path("reconcile", f"{plant_id}.json")
        if target is not None:
            target.write_text(_dumps(final.to_dict()))
    return PlantResult(final, emergence, problems)


def _run_plant_job(args):
    return run_plant(*args)


# --- whole dataset ------------------------------------------------------------


@dataclass
class DatasetResult:
    timelines: list[PlantTimeline]
    report: MetricsReport | None
    problems: list[str]
    emergence: dict[str, int | None]

    @property
    def partial_failure(self) -> bool:
        return bool(self.problems)


def run_dataset(manifest: Manifest, config: PipelineConfig | None = None, out_dir=None,
                resume: bool = False, jobs: int = 1, overlays: bool = False) -> DatasetResult:
    """Run all plants, then evaluate against ground truth if the manifest names one."""
    config = config or PipelineConfig()
    plants = manifest.plants
    args = [(manifest, p, config, out_dir, resume) for p in plants]
    if jobs > 1 and len(plants) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_plant_job, args))
    else:
        results = [_run_plant_job(a) for a in args]

    timelines = [r.timeline for r in results]
    problems = [p for r in results for p in r.problems]
    report = None
    if not timelines:
        report = MetricsReport(metadata={"config_hash": config.hash})
    elif manifest.ground_truth is not None:
        truth = load_ground_truth(manifest.ground_truth)
        report = evaluate_timelines(timelines, truth, config.match_tolerance, config.truth_mode)
        report.metadata["config_hash"] = config.hash
    result = DatasetResult(timelines, report, problems, {p: r.emergence_day for p, r in zip(plants, results)})
    if out_dir is not None:
        write_outputs(result, manifest, config, out_dir, overlays)
    return result


def write_outputs(result: DatasetResult, manifest: Manifest, config: PipelineConfig, out_dir,
                  overlays: bool = False) -> None:
    out = Path(out_dir)
    det_dir = out / "detections"
    det_dir.mkdir(parents=True, exist_ok=True)
    for tl in result.timelines:
        doc = {"config_hash": config.hash, **tl.to_dict()}
        (det_dir / f"{tl.plant_id}.json").write_text(json.dumps(doc, sort_keys=True, indent=1))
    with open(out / "audit.jsonl", "w") as f:
        for tl in result.timelines:
            for rec in tl.records:
                for a in rec.audit:
                    f.write(_dumps({"plant": rec.plant_id, "day": rec.day, "config_hash": config.hash,
                                    **a.to_dict()}) + "\n")
    if result.report is not None:
        write_metrics(result.report, out)
    summary = {
        "config_hash": config.hash,
        "config": config.to_dict(),
        "plants": len(result.timelines),
        "emergence_day": result.emergence,
        "problems": result.problems,
        "missing_slots": [[p, d, v.degrees] for p, d, v in manifest.missing],
    }
    (out / "run.json").write_text(json.dumps(summary, sort_keys=True, indent=1))
    if overlays:
        write_overlays(result.timelines, manifest, out / "overlays")


def write_overlays(timelines, manifest: Manifest, out_dir) -> int:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lookup = manifest.lookup()
    n = 0
    for tl in timelines:
        for rec in tl.records:
            if rec.view is None:
                continue
            entry = lookup.get((rec.plant_id, rec.day, rec.view))
            if entry is None:
                continue
            img = render_overlay(rec, load_image(entry.image))
            save_image(out / f"{rec.plant_id}_d{rec.day:03d}.png", img)
            n += 1
    return n
