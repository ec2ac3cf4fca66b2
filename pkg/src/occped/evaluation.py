"""Log-average miss rate (MR^-2) over false positives per image.

Per image, detections are matched greedily in descending score order.
A detection takes the unmatched evaluated instance with the highest IoU
when that IoU reaches the threshold. Otherwise, if it covers an ignored
instance (IoA of the detection against the ignored full box reaches the
threshold) it is dropped; otherwise it is a false positive. Greedy
matching in score order is prefix-stable, so one pass per image gives the
outcome of every detection at every score threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .dataset_io import (
    Detection,
    ImageAnnotation,
    Instance,
    SubsetSpec,
    group_detections,
    partition_for_eval,
)
from .errors import ValidationError
from .geometry import boxes_to_array, ioa_matrix, iou_matrix

MR_EPS = 1e-10
REFERENCE_FPPI = tuple(float(v) for v in np.logspace(-2.0, 0.0, 9))

TP, FP, IGNORED = 1, 0, -1


@dataclass(frozen=True)
class ImageTally:
    tp: int
    fp: int
    fn: int
    ignored: int


@dataclass(frozen=True)
class ImageMatch:
    """Per-detection outcomes of one image, detections in descending score."""

    scores: np.ndarray
    outcomes: np.ndarray  # TP / FP / IGNORED per detection
    n_gt: int

    def tally(self) -> ImageTally:
        tp = int(np.sum(self.outcomes == TP))
        return ImageTally(
            tp=tp,
            fp=int(np.sum(self.outcomes == FP)),
            fn=self.n_gt - tp,
            ignored=int(np.sum(self.outcomes == IGNORED)),
        )


@dataclass(frozen=True)
class CurvePoint:
    score: float
    fppi: float
    miss_rate: float


@dataclass(frozen=True)
class EvalCurve:
    points: tuple[CurvePoint, ...]
    n_images: int
    n_gt: int


@dataclass(frozen=True)
class MRResult:
    mr2: float
    reference_fppi: tuple[float, ...]
    miss_rates: tuple[float, ...]
    curve: EvalCurve | None = None

    def to_dict(self) -> dict:
        out = {
            "mr2": self.mr2,
            "points": [
                {"fppi": f, "miss_rate": m} for f, m in zip(self.reference_fppi, self.miss_rates)
            ],
        }
        if self.curve is not None:
            out["n_images"] = self.curve.n_images
            out["n_gt"] = self.curve.n_gt
        return out


def match_detections(
    dets: Sequence[Detection],
    evaluate: Sequence[Instance],
    ignore: Sequence[Instance] = (),
    iou_thresh: float = 0.5,
) -> ImageMatch:
    dets = list(dets)
    scores = np.array([d.score for d in dets], dtype=np.float64)
    order = np.argsort(-scores, kind="stable")
    scores = scores[order]
    outcomes = np.full(len(dets), FP, dtype=np.int8)
    if not dets:
        return ImageMatch(scores, outcomes, len(evaluate))

    det_boxes = boxes_to_array([dets[i].box for i in order])
    ious = iou_matrix(det_boxes, [g.full for g in evaluate])
    covers = ioa_matrix(det_boxes, [g.full for g in ignore])
    matched = np.zeros(len(evaluate), dtype=bool)
    for k in range(len(dets)):
        if len(evaluate):
            cand = np.where(matched, -1.0, ious[k])
            g = int(np.argmax(cand))
            if cand[g] >= iou_thresh:
                matched[g] = True
                outcomes[k] = TP
                continue
        if len(ignore) and covers[k].max() >= iou_thresh:
            outcomes[k] = IGNORED
    return ImageMatch(scores, outcomes, len(evaluate))


def match_image(
    dets: Sequence[Detection],
    evaluate: Sequence[Instance],
    ignore: Sequence[Instance] = (),
    iou_thresh: float = 0.5,
) -> ImageTally:
    return match_detections(dets, evaluate, ignore, iou_thresh).tally()


def curve_from_matches(matches: Sequence[ImageMatch]) -> EvalCurve:
    """Aggregate per-image outcomes into (score, FPPI, miss rate) points.

    One point per distinct score, highest first. With no detections at
    all the curve is the single point (FPPI 0, miss rate 1).
    """
    n_images = len(matches)
    n_gt = sum(m.n_gt for m in matches)
    if n_gt == 0:
        raise ValidationError("no ground-truth instances to evaluate")
    if not matches:
        raise ValidationError("no images to evaluate")
    scores = np.concatenate([m.scores for m in matches])
    outcomes = np.concatenate([m.outcomes for m in matches])
    if scores.size == 0:
        return EvalCurve((CurvePoint(math.inf, 0.0, 1.0),), n_images, n_gt)

    order = np.argsort(-scores, kind="stable")
    scores = scores[order]
    outcomes = outcomes[order]
    cum_tp = np.cumsum(outcomes == TP)
    cum_fp = np.cumsum(outcomes == FP)
    # last index of every run of equal scores
    ends = np.flatnonzero(np.append(scores[1:] != scores[:-1], True))
    points = tuple(
        CurvePoint(
            score=float(scores[i]),
            fppi=float(cum_fp[i]) / n_images,
            miss_rate=float(n_gt - cum_tp[i]) / n_gt,
        )
        for i in ends
    )
    return EvalCurve(points, n_images, n_gt)


def sweep_curve(
    images: Iterable[tuple[Sequence[Detection], Sequence[Instance], Sequence[Instance]]],
    iou_thresh: float = 0.5,
    executor=None,
) -> EvalCurve:
    """Build the FPPI / miss-rate curve from ``(dets, evaluate, ignore)`` per image."""
    mapper = executor.map if executor is not None else map
    matches = list(mapper(lambda item: match_detections(*item, iou_thresh=iou_thresh), list(images)))
    return curve_from_matches(matches)


def sample_miss_rates(curve: EvalCurve, refs: Sequence[float] = REFERENCE_FPPI) -> list[float]:
    """Step-interpolated miss rate at each reference FPPI.

    Uses the last curve point with FPPI <= reference; when every point lies
    above the reference, the last point of the lowest-FPPI run.
    """
    if not curve.points:
        raise ValidationError("empty curve")
    fppi = np.array([p.fppi for p in curve.points])
    miss = np.array([p.miss_rate for p in curve.points])
    fallback = int(np.flatnonzero(fppi == fppi.min())[-1])
    out = []
    for f in refs:
        idx = np.flatnonzero(fppi <= f)
        out.append(float(miss[idx[-1]] if idx.size else miss[fallback]))
    return out


def log_average_miss_rate(curve: EvalCurve, eps: float = MR_EPS) -> MRResult:
    """Geometric mean of the miss rates sampled at the nine reference FPPIs."""
    sampled = sample_miss_rates(curve, REFERENCE_FPPI)
    mr = np.maximum(np.array(sampled), eps)
    # scale by the first sample so that a constant curve comes back exactly
    base = mr[0]
    mr2 = float(base * math.exp(math.fsum(np.log(mr / base)) / len(mr)))
    return MRResult(mr2=mr2, reference_fppi=REFERENCE_FPPI, miss_rates=tuple(sampled), curve=curve)


def evaluate_dataset(
    annotations: Sequence[ImageAnnotation],
    detections: Iterable[Detection],
    spec: SubsetSpec,
    iou_thresh: float = 0.5,
    executor=None,
) -> MRResult:
    by_image = group_detections(detections)
    known = {a.image_id for a in annotations}
    unknown = sorted(set(by_image) - known)
    if unknown:
        raise ValidationError(f"detections reference unknown images: {unknown[:5]}")
    items = []
    for ann in annotations:
        evaluate, ignore = partition_for_eval(ann, spec)
        items.append((by_image.get(ann.image_id, []), evaluate, ignore))
    curve = sweep_curve(items, iou_thresh, executor=executor)
    return log_average_miss_rate(curve)


def curve_to_csv(curve: EvalCurve) -> str:
    lines = ["score,fppi,miss_rate"]
    lines += [f"{p.score!r},{p.fppi!r},{p.miss_rate!r}" for p in curve.points]
    return "\n".join(lines) + "\n"
