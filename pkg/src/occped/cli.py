"""Command line entry point: ``occped <subcommand> ...``.

Exit status is 0 on success, 1 when input data or configuration is
invalid and 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from pathlib import Path

from . import __version__
from .anchors import DEFAULT_STRIDES, generate_anchor_grid
from .augmentation import apply_occlusion, plan_occlusion, read_raster, write_plan, write_raster
from .dataset_io import (
    ImageAnnotation,
    Instance,
    group_detections,
    read_annotations,
    read_detections,
    subset_from_name,
    write_annotations,
    write_detections,
)
from .errors import OccpedError
from .evaluation import curve_to_csv, evaluate_dataset
from .geometry import array_to_boxes
from .postprocess import postprocess
from .sampling import (
    JitterConfig,
    MatchConfig,
    build_rcnn_training_set,
    jitter_ground_truths,
    positive_sample_stats,
)
from .synthetic import (
    MockDetectorConfig,
    SceneConfig,
    generate_dataset,
    image_rng,
    mock_detect,
    render_scene,
)


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


@contextmanager
def _executor(threads: int | None):
    n = threads or os.cpu_count() or 1
    if n <= 1:
        yield None
        return
    with ThreadPoolExecutor(max_workers=n) as pool:
        yield pool


def _load_json(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


# ---------------------------------------------------------------------------
# subcommands


def cmd_eval(args) -> int:
    anns = read_annotations(args.ann)
    dets = read_detections(args.det)
    spec = subset_from_name(args.subset, args.min_height, args.occ_lo, args.occ_hi)
    with _executor(args.threads) as pool:
        result = evaluate_dataset(anns, dets, spec, iou_thresh=args.iou, executor=pool)
    payload = {"subset": args.subset, "iou": args.iou, **result.to_dict()}
    if args.csv:
        Path(args.csv).write_text(curve_to_csv(result.curve), encoding="utf-8")
    _emit(_json(payload), args.out)
    return 0


def cmd_postprocess(args) -> int:
    dets = read_detections(args.det)
    with _executor(args.threads) as pool:
        kept = postprocess(dets, iou_thresh=args.nms_iou, k=args.top_k, executor=pool)
    _emit(write_detections(kept), args.out)
    return 0


def _match_stats_one(ann: ImageAnnotation, proposals, seed: int, count: int, amplitude: float):
    gts = [inst.full for inst in ann.instances if not inst.ignore]
    jitter = JitterConfig(count=count, amplitude=amplitude, seed=seed)
    out = {}
    for name, cfg in (("strict", MatchConfig.rcnn()), ("baseline", MatchConfig.rcnn_baseline())):
        # identical jitter draws for both configurations
        rng = image_rng(seed, ann.image_id)
        assignments = build_rcnn_training_set(
            proposals, gts, cfg, jitter, ann.width, ann.height, rng=rng
        )
        out[name] = positive_sample_stats(assignments, gts)
    return out


def cmd_match_stats(args) -> int:
    anns = read_annotations(args.ann)
    props = group_detections(read_detections(args.proposals)) if args.proposals else {}

    def one(ann):
        boxes = [d.box for d in props.get(ann.image_id, [])]
        return _match_stats_one(ann, boxes, args.seed, args.count, args.amplitude)

    with _executor(args.threads) as pool:
        per_image = list(pool.map(one, anns) if pool else map(one, anns))

    summary = {}
    for name, cfg in (("strict", MatchConfig.rcnn()), ("baseline", MatchConfig.rcnn_baseline())):
        stats = [s[name] for s in per_image]
        hist = [sum(col) for col in zip(*(s.iou_histogram for s in stats))] if stats else []
        summary[name] = {
            "pos_thresh": cfg.pos_thresh,
            "neg_thresh": cfg.neg_thresh,
            "n_images": len(stats),
            "n_positive": sum(s.n_positive for s in stats),
            "n_negative": sum(s.n_negative for s in stats),
            "n_ignored": sum(s.n_ignored for s in stats),
            "straddle_count": sum(s.straddle_count for s in stats),
            "mean_straddle_per_image": (sum(s.straddle_count for s in stats) / len(stats)) if stats else 0.0,
            "iou_bins": stats[0].iou_bins if stats else [],
            "iou_histogram": hist,
        }
    _emit(_json(summary), args.out)
    return 0


def cmd_jitter(args) -> int:
    anns = read_annotations(args.ann)
    cfg = JitterConfig(count=args.count, amplitude=args.amplitude, seed=args.seed)
    out = []
    for ann in anns:
        gts = [inst.full for inst in ann.instances if not inst.ignore]
        boxes = jitter_ground_truths(gts, cfg, ann.width, ann.height, rng=image_rng(args.seed, ann.image_id))
        insts = tuple(Instance(full=b, id=k) for k, b in enumerate(boxes))
        out.append(ImageAnnotation(ann.image_id, ann.width, ann.height, insts))
    _emit(write_annotations(out), args.out)
    return 0


def _find_raster(directory: Path, image_id: str) -> Path | None:
    for suffix in (".ppm", ".png"):
        p = directory / f"{image_id}{suffix}"
        if p.exists():
            return p
    return None


def cmd_augment(args) -> int:
    anns = read_annotations(args.ann)
    img_dir = Path(args.images)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def one(ann):
        gts = [inst.full for inst in ann.instances if not inst.ignore]
        plan = plan_occlusion(gts, p=args.p, seed=args.seed, rng=image_rng(args.seed, ann.image_id))
        src = _find_raster(img_dir, ann.image_id)
        if src is not None:
            img = read_raster(src)
            write_raster(apply_occlusion(img, gts, plan), out_dir / f"{ann.image_id}.ppm")
        return ann.image_id, plan, src is not None

    with _executor(args.threads) as pool:
        results = list(pool.map(one, anns) if pool else map(one, anns))
    write_plan({image_id: plan for image_id, plan, _ in results}, out_dir / "plan.json")
    summary = {
        "seed": args.seed,
        "p": args.p,
        "n_images": len(results),
        "n_rasters_written": sum(1 for *_, found in results if found),
        "missing_rasters": [image_id for image_id, _, found in results if not found],
        "plan": str(out_dir / "plan.json"),
    }
    _emit(_json(summary), args.out)
    return 0


def cmd_anchors(args) -> int:
    grid = generate_anchor_grid(args.width, args.height, args.strides, args.ratios)
    anns = []
    for level, boxes in zip(grid.levels, grid.anchors):
        insts = tuple(Instance(full=b, id=k) for k, b in enumerate(array_to_boxes(boxes)))
        anns.append(ImageAnnotation(f"stride{level.stride}_scale{int(level.scale)}", args.width, args.height, insts))
    _emit(write_annotations(anns), args.out)
    return 0


def cmd_synth(args) -> int:
    config = _load_json(args.config)
    unknown = set(config) - {"scene", "detector", "n_images"}
    if unknown:
        raise OccpedError(f"unknown config keys: {sorted(unknown)}")
    scene_cfg = SceneConfig.from_dict(config.get("scene"))
    det_cfg = MockDetectorConfig.from_dict({**(config.get("detector") or {}), "seed": args.seed})
    n_images = int(args.n_images if args.n_images is not None else config.get("n_images", 10))

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with _executor(args.threads) as pool:
        anns = generate_dataset(scene_cfg, n_images, args.seed, executor=pool)
        mapper = pool.map if pool else map
        det_lists = list(mapper(lambda a: mock_detect(a, det_cfg), anns))
        if args.rasters:
            def render(item):
                k, ann = item
                write_raster(render_scene(ann, seed=k), out_dir / f"{ann.image_id}.ppm")

            list(mapper(render, enumerate(anns)))
    (out_dir / "annotations.odann").write_text(write_annotations(anns), encoding="utf-8")
    (out_dir / "detections.oddet").write_text(
        write_detections([d for dl in det_lists for d in dl]), encoding="utf-8"
    )
    summary = {
        "seed": args.seed,
        "n_images": n_images,
        "n_instances": sum(len(a.instances) for a in anns),
        "n_detections": sum(len(d) for d in det_lists),
        "annotations": str(out_dir / "annotations.odann"),
        "detections": str(out_dir / "detections.oddet"),
    }
    _emit(_json(summary), args.out)
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="occped", description="Occluded pedestrian detection tooling.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    def common(p, seed=False):
        p.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")
        p.add_argument("--out", default=None, help="output file (default: stdout)")
        if seed:
            p.add_argument("--seed", type=int, required=True)

    p = sub.add_parser("eval", help="MR^-2 of detections against annotations")
    p.add_argument("--ann", required=True)
    p.add_argument("--det", required=True)
    p.add_argument("--subset", choices=["reasonable", "heavy", "all", "custom"], default="reasonable")
    p.add_argument("--min-height", type=float, default=None)
    p.add_argument("--occ-lo", type=float, default=None)
    p.add_argument("--occ-hi", type=float, default=None)
    p.add_argument("--iou", type=float, default=0.5)
    p.add_argument("--csv", default=None, help="write the full curve as CSV")
    common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("postprocess", help="per-image NMS followed by top-k")
    p.add_argument("--det", required=True)
    p.add_argument("--nms-iou", type=float, default=0.5)
    p.add_argument("--top-k", type=int, default=100)
    common(p)
    p.set_defaults(func=cmd_postprocess)

    p = sub.add_parser("match-stats", help="positive-sample statistics, strict vs 0.5 threshold")
    p.add_argument("--ann", required=True)
    p.add_argument("--proposals", default=None, help="proposal boxes in detection format")
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--amplitude", type=float, default=0.2)
    common(p, seed=True)
    p.set_defaults(func=cmd_match_stats)

    p = sub.add_parser("jitter", help="jittered ground-truth boxes in annotation format")
    p.add_argument("--ann", required=True)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--amplitude", type=float, default=0.2)
    common(p, seed=True)
    p.set_defaults(func=cmd_jitter)

    p = sub.add_parser("augment", help="occlusion-simulated augmentation of rasters")
    p.add_argument("--ann", required=True)
    p.add_argument("--images", required=True, help="directory with <ID>.ppm or <ID>.png")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--p", type=float, default=0.5)
    common(p, seed=True)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("anchors", help="dump the anchor grid, one line per level")
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--strides", type=int, nargs="+", default=list(DEFAULT_STRIDES))
    p.add_argument("--ratios", type=float, nargs="+", default=[0.5, 1.0, 2.0])
    common(p)
    p.set_defaults(func=cmd_anchors)

    p = sub.add_parser("synth", help="synthetic scenes plus mock detections")
    p.add_argument("--config", default=None, help="JSON with 'scene', 'detector', 'n_images'")
    p.add_argument("--n-images", type=int, default=None)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--rasters", action="store_true", help="also write PPM renderings")
    common(p, seed=True)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        return args.func(args)
    except (OccpedError, OSError, json.JSONDecodeError) as exc:
        print(f"occped {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
