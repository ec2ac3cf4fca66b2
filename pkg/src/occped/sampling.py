"""IoU-threshold sample matching and ground-truth jittering.

The strict criterion for the second stage raises the positive IoU
threshold to 0.7 and adds jittered copies of every ground truth (plus the
ground truths themselves) to the proposal set. Jittered boxes are not
force-labelled: they are matched like any other candidate.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError
from .geometry import BBox, BoxDeltas, array_to_boxes, boxes_to_array, encode_deltas, iou_matrix


class Stage(str, enum.Enum):
    RPN = "rpn"
    RCNN = "rcnn"


class Label(str, enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    IGNORED = "ignored"


@dataclass(frozen=True)
class MatchConfig:
    pos_thresh: float = 0.7
    neg_thresh: float = 0.5
    stage: Stage = Stage.RCNN

    def __post_init__(self):
        if not (0.0 <= self.neg_thresh <= self.pos_thresh <= 1.0):
            raise ConfigError(
                f"need 0 <= neg_thresh <= pos_thresh <= 1, got {self.neg_thresh}, {self.pos_thresh}"
            )

    @classmethod
    def rpn(cls) -> "MatchConfig":
        return cls(pos_thresh=0.7, neg_thresh=0.3, stage=Stage.RPN)

    @classmethod
    def rcnn(cls) -> "MatchConfig":
        return cls(pos_thresh=0.7, neg_thresh=0.5, stage=Stage.RCNN)

    @classmethod
    def rcnn_baseline(cls) -> "MatchConfig":
        """The usual 0.5 positive threshold, kept for comparison."""
        return cls(pos_thresh=0.5, neg_thresh=0.5, stage=Stage.RCNN)


@dataclass(frozen=True)
class JitterConfig:
    count: int = 10
    amplitude: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.count < 0:
            raise ConfigError(f"jitter count must be >= 0, got {self.count}")
        if not (0.0 <= self.amplitude < 1.0):
            raise ConfigError(f"jitter amplitude must be in [0, 1), got {self.amplitude}")


@dataclass(frozen=True)
class SampleAssignment:
    index: int
    box: BBox
    label: Label
    gt_index: int | None
    max_iou: float
    target: BoxDeltas | None = None


def match_samples(
    candidates: Sequence[BBox], gts: Sequence[BBox], cfg: MatchConfig
) -> list[SampleAssignment]:
    """Label every candidate by its best-overlapping ground truth.

    Ties on the maximum IoU go to the lowest ground-truth index. There is
    no forced best-candidate-per-GT assignment.
    """
    if not isinstance(cfg, MatchConfig):
        raise ConfigError("cfg must be a MatchConfig")
    candidates = list(candidates)
    gts = list(gts)
    if not candidates:
        return []
    if not gts:
        return [
            SampleAssignment(i, c, Label.NEGATIVE, None, 0.0) for i, c in enumerate(candidates)
        ]

    ious = iou_matrix(candidates, gts)
    best = ious.argmax(axis=1)
    best_iou = ious[np.arange(len(candidates)), best]

    out = []
    for i, cand in enumerate(candidates):
        m = float(best_iou[i])
        g = int(best[i])
        if m >= cfg.pos_thresh:
            out.append(
                SampleAssignment(i, cand, Label.POSITIVE, g, m, encode_deltas(cand, gts[g]))
            )
        elif m < cfg.neg_thresh:
            out.append(SampleAssignment(i, cand, Label.NEGATIVE, None, m))
        else:
            out.append(SampleAssignment(i, cand, Label.IGNORED, None, m))
    return out


def jitter_ground_truths(
    gts: Sequence[BBox],
    cfg: JitterConfig,
    image_w: float,
    image_h: float,
    rng: np.random.Generator | None = None,
) -> list[BBox]:
    """Draw ``cfg.count`` perturbed copies of every ground truth.

    Each corner coordinate moves independently: x by
    ``Uniform(-a*w, a*w)``, y by ``Uniform(-a*h, a*h)``. Results are
    clipped to the image and boxes left without positive extent are dropped.
    Output order is GT-major.
    """
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    g = boxes_to_array(gts)
    if len(g) == 0 or cfg.count == 0:
        return []
    w = g[:, 2] - g[:, 0]
    h = g[:, 3] - g[:, 1]
    half = cfg.amplitude * np.stack([w, h, w, h], axis=1)[:, None, :]
    offsets = rng.uniform(-half, half, size=(len(g), cfg.count, 4))
    boxes = (g[:, None, :] + offsets).reshape(-1, 4)
    boxes[:, [0, 2]] = np.clip(boxes[:, [0, 2]], 0.0, image_w)
    boxes[:, [1, 3]] = np.clip(boxes[:, [1, 3]], 0.0, image_h)
    ok = (boxes[:, 2] > boxes[:, 0]) & (boxes[:, 3] > boxes[:, 1])
    return array_to_boxes(boxes[ok])


def build_rcnn_training_set(
    proposals: Sequence[BBox],
    gts: Sequence[BBox],
    match_cfg: MatchConfig | None = None,
    jitter_cfg: JitterConfig | None = None,
    image_w: float = float("inf"),
    image_h: float = float("inf"),
    rng: np.random.Generator | None = None,
) -> list[SampleAssignment]:
    """Match ``proposals + jittered GTs + GTs`` against the ground truths.

    Assignment indices refer to that concatenated candidate list.
    """
    match_cfg = match_cfg or MatchConfig.rcnn()
    jitter_cfg = jitter_cfg or JitterConfig()
    gts = list(gts)
    jittered = jitter_ground_truths(gts, jitter_cfg, image_w, image_h, rng=rng)
    candidates = list(proposals) + jittered + gts
    return match_samples(candidates, gts, match_cfg)


@dataclass
class PositiveStats:
    n_positive: int = 0
    n_negative: int = 0
    n_ignored: int = 0
    straddle_count: int = 0
    per_gt_positive: list[int] = field(default_factory=list)
    iou_bins: list[float] = field(default_factory=lambda: np.linspace(0.0, 1.0, 11).tolist())
    iou_histogram: list[int] = field(default_factory=lambda: [0] * 10)

    def to_dict(self) -> dict:
        return {
            "n_positive": self.n_positive,
            "n_negative": self.n_negative,
            "n_ignored": self.n_ignored,
            "straddle_count": self.straddle_count,
            "per_gt_positive": list(self.per_gt_positive),
            "iou_bins": list(self.iou_bins),
            "iou_histogram": list(self.iou_histogram),
        }


def positive_sample_stats(
    assignments: Sequence[SampleAssignment],
    gts: Sequence[BBox],
    straddle_iou: float = 0.3,
    n_bins: int = 10,
) -> PositiveStats:
    """Summarize label counts and the quality of positive samples.

    A straddling positive is one whose IoU with some ground truth other
    than its assigned one exceeds ``straddle_iou``. The histogram covers
    positive IoUs over ``[0, 1]`` with the last bin closed.
    """
    gts = list(gts)
    bins = np.linspace(0.0, 1.0, n_bins + 1)
    stats = PositiveStats(
        per_gt_positive=[0] * len(gts),
        iou_bins=bins.tolist(),
        iou_histogram=[0] * n_bins,
    )
    positives = []
    for a in assignments:
        if a.label is Label.POSITIVE:
            positives.append(a)
        elif a.label is Label.NEGATIVE:
            stats.n_negative += 1
        else:
            stats.n_ignored += 1
    stats.n_positive = len(positives)
    if not positives:
        return stats

    ious = iou_matrix([a.box for a in positives], gts)
    assigned = np.array([a.gt_index for a in positives])
    rows = np.arange(len(positives))
    own = ious[rows, assigned]
    others = ious.copy()
    others[rows, assigned] = -1.0
    stats.straddle_count = int(np.sum(others.max(axis=1) > straddle_iou)) if len(gts) > 1 else 0
    stats.per_gt_positive = np.bincount(assigned, minlength=len(gts)).tolist()
    stats.iou_histogram = np.histogram(own, bins=bins)[0].tolist()
    return stats
