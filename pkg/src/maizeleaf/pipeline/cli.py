"""Command line interface.

Exit codes: 0 on success, 1 when the run finished but recorded per-plant or
per-day failures, 2 on invalid invocation or unusable input.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..assignment import reconcile_timeline
from ..errors import InvalidInputError, ManifestError
from ..evaluation import evaluate_timelines, load_ground_truth, write_metrics
from ..hull import View
from ..raster import load_image, load_mask, save_image, save_mask, segment_plant
from ..records import PlantTimeline
from ..skeleton.graph import extract_graph
from ..skeleton.thinning import skeletonize
from .config import load_config
from .manifest import DEFAULT_PATTERN, load_manifest, scan_directory
from .overlay import render_overlay
from .run import detect_day, run_dataset, write_overlays

log = logging.getLogger("maizeleaf")

EXIT_OK, EXIT_PARTIAL, EXIT_USAGE = 0, 1, 2


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", type=Path, help="pipeline config JSON (default: packaged defaults)")
    p.add_argument("--manifest", type=Path, help="dataset manifest JSON")
    p.add_argument("--out", type=Path, help="output file or directory")
    p.add_argument("--resume", action="store_true", help="reuse stage outputs already on disk")
    p.add_argument("--jobs", type=int, default=1, help="plants processed in parallel")
    p.add_argument("--log-level", default="WARNING", help="logging level")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="maizeleaf", parents=[common],
                                     description="Maize leaf detection, counting and tracking.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment", parents=[common], help="segment one image against its background")
    p.add_argument("image", type=Path)
    p.add_argument("--background", type=Path, required=True)

    p = sub.add_parser("skeletonize", parents=[common], help="thin a mask and optionally dump its graph")
    p.add_argument("mask", type=Path)
    p.add_argument("--day", type=int, required=True, help="days since emergence")
    p.add_argument("--graph", type=Path, help="write the skeleton graph as JSON")

    p = sub.add_parser("detect", parents=[common], help="detect leaves on one plant-day")
    p.add_argument("--view0", type=Path)
    p.add_argument("--view90", type=Path)
    p.add_argument("--background", type=Path, required=True)
    p.add_argument("--day", type=int, required=True, help="days since emergence")
    p.add_argument("--plant", default="plant")
    p.add_argument("--overlay", type=Path, help="also write an overlay PNG")

    p = sub.add_parser("run", parents=[common], help="run the full pipeline over a manifest")
    p.add_argument("--overlays", action="store_true", help="write overlay PNGs for every plant-day")

    p = sub.add_parser("reconcile", parents=[common], help="reconcile detection timelines")
    p.add_argument("detections", type=Path, nargs="+", help="timeline JSON files or directories")

    p = sub.add_parser("evaluate", parents=[common], help="score timelines against ground truth")
    p.add_argument("detections", type=Path, nargs="+", help="timeline JSON files or directories")
    p.add_argument("--truth", type=Path, help="ground-truth JSON (default: from the manifest)")

    p = sub.add_parser("overlay", parents=[common], help="render overlays for timelines")
    p.add_argument("detections", type=Path, nargs="+", help="timeline JSON files or directories")

    p = sub.add_parser("synth", parents=[common], help="render a synthetic dataset")
    p.add_argument("--plants", type=int, default=5)
    p.add_argument("--days", type=int, default=27)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-occlusion", action="store_true")
    p.add_argument("--no-spur", action="store_true")

    p = sub.add_parser("manifest", parents=[common], help="build a manifest from file names")
    p.add_argument("root", type=Path)
    p.add_argument("--background", type=Path, required=True)
    p.add_argument("--pattern", default=DEFAULT_PATTERN,
                   help="regex with named groups plant, day and view")
    p.add_argument("--truth", type=Path)
    return parser


def _require(args, name):
    if getattr(args, name) is None:
        raise InvalidInputError(f"--{name} is required for '{args.command}'")
    return getattr(args, name)


def _timeline_files(paths) -> list[Path]:
    files = []
    for p in paths:
        files += sorted(p.glob("*.json")) if p.is_dir() else [p]
    return files


def _load_timelines(paths) -> list[PlantTimeline]:
    out = []
    for f in _timeline_files(paths):
        data = json.loads(f.read_text())
        out.append(PlantTimeline.from_dict(data))
    return out


def _cmd_segment(args, config) -> int:
    mask = segment_plant(load_image(args.image), load_image(args.background), config.segmentation)
    save_mask(_require(args, "out"), mask)
    print(f"{int(mask.sum())} foreground pixels")
    return EXIT_OK


def _cmd_skeletonize(args, config) -> int:
    skel = skeletonize(load_mask(args.mask), args.day)
    save_mask(_require(args, "out"), skel)
    if args.graph:
        args.graph.write_text(json.dumps(extract_graph(skel).to_dict()))
    print(f"{int(skel.sum())} skeleton pixels")
    return EXIT_OK


def _cmd_detect(args, config) -> int:
    paths = {View.VIEW0: args.view0, View.VIEW90: args.view90}
    paths = {v: p for v, p in paths.items() if p is not None}
    if not paths:
        raise InvalidInputError("give --view0 and/or --view90")
    bg = load_image(args.background)
    images = {v: load_image(p) for v, p in paths.items()}
    record, _ = detect_day(images, {v: bg for v in images}, args.plant, args.day, args.day, config)
    doc = {"config_hash": config.hash, **record.to_dict()}
    text = json.dumps(doc, sort_keys=True, indent=1)
    if args.out:
        args.out.write_text(text)
    else:
        print(text)
    if args.overlay:
        save_image(args.overlay, render_overlay(record, images[record.view]))
    print(f"{record.count} leaves ({record.view.value})", file=sys.stderr)
    return EXIT_OK


def _cmd_run(args, config) -> int:
    manifest = load_manifest(_require(args, "manifest"))
    out = _require(args, "out")
    result = run_dataset(manifest, config, out, resume=args.resume, jobs=max(1, args.jobs),
                         overlays=args.overlays)
    for tl in result.timelines:
        print(f"{tl.plant_id}: {' '.join(str(c) for c in tl.counts)}")
    if result.report is not None:
        s = result.report.summary()
        print(f"precision {s['precision']}, recall {s['recall']}, "
              f"mean abs loss {s['mean_abs_loss']}")
    for problem in result.problems:
        print(f"problem: {problem}", file=sys.stderr)
    return EXIT_PARTIAL if result.partial_failure else EXIT_OK


def _cmd_reconcile(args, config) -> int:
    out = _require(args, "out")
    out.mkdir(parents=True, exist_ok=True)
    for tl in _load_timelines(args.detections):
        final = reconcile_timeline(tl, config.reconcile)
        doc = {"config_hash": config.hash, **final.to_dict()}
        (out / f"{tl.plant_id}.json").write_text(json.dumps(doc, sort_keys=True, indent=1))
        print(f"{tl.plant_id}: {' '.join(map(str, tl.counts))} -> {' '.join(map(str, final.counts))}")
    return EXIT_OK


def _cmd_evaluate(args, config) -> int:
    truth_path = args.truth
    if truth_path is None:
        truth_path = load_manifest(_require(args, "manifest")).ground_truth
    if truth_path is None:
        raise InvalidInputError("no ground truth given (--truth or a manifest with ground_truth)")
    report = evaluate_timelines(_load_timelines(args.detections), load_ground_truth(truth_path),
                                config.match_tolerance, config.truth_mode)
    report.metadata["config_hash"] = config.hash
    if args.out:
        write_metrics(report, args.out)
    print(json.dumps(report.summary(), indent=1, sort_keys=True))
    return EXIT_OK


def _cmd_overlay(args, config) -> int:
    manifest = load_manifest(_require(args, "manifest"))
    n = write_overlays(_load_timelines(args.detections), manifest, _require(args, "out"))
    print(f"{n} overlays written")
    return EXIT_OK


def _cmd_synth(args, config) -> int:
    from .synth import write_dataset

    path = write_dataset(_require(args, "out"), args.plants, args.days, args.seed,
                         occlusion=not args.no_occlusion, spur=not args.no_spur)
    print(path)
    return EXIT_OK


def _cmd_manifest(args, config) -> int:
    data = scan_directory(args.root, args.background.resolve(), args.pattern,
                          args.truth.resolve() if args.truth else None)
    text = json.dumps(data, indent=1)
    if args.out:
        args.out.write_text(text)
    else:
        print(text)
    print(f"{len(data['entries'])} images", file=sys.stderr)
    return EXIT_OK


COMMANDS = {
    "segment": _cmd_segment,
    "skeletonize": _cmd_skeletonize,
    "detect": _cmd_detect,
    "run": _cmd_run,
    "reconcile": _cmd_reconcile,
    "evaluate": _cmd_evaluate,
    "overlay": _cmd_overlay,
    "synth": _cmd_synth,
    "manifest": _cmd_manifest,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args.config)
        return COMMANDS[args.command](args, config)
    except (InvalidInputError, ManifestError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
