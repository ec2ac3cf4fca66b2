"""Greedy NMS and top-k truncation of per-image detections."""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .dataset_io import Detection, group_detections
from .errors import ValidationError
from .geometry import boxes_to_array, iou_matrix

NMS_IOU = 0.5
TOP_K = 100


def _score_order(dets: Sequence[Detection]) -> np.ndarray:
    scores = np.array([d.score for d in dets], dtype=np.float64)
    # stable sort on negated scores keeps input order among ties
    return np.argsort(-scores, kind="stable")


def nms(dets: Sequence[Detection], iou_thresh: float = NMS_IOU) -> list[Detection]:
    """Hard greedy NMS on detections from a single image.

    A detection survives iff its IoU with every higher-ranked survivor is
    at most ``iou_thresh``. Output is sorted by descending score.
    """
    dets = list(dets)
    if not dets:
        return []
    if len({d.image_id for d in dets}) > 1:
        raise ValidationError("nms expects detections from a single image")
    order = _score_order(dets)
    boxes = boxes_to_array([dets[i].box for i in order])
    ious = iou_matrix(boxes, boxes)
    suppressed = np.zeros(len(order), dtype=bool)
    keep = []
    for rank in range(len(order)):
        if suppressed[rank]:
            continue
        keep.append(order[rank])
        suppressed[rank + 1 :] |= ious[rank, rank + 1 :] > iou_thresh
    return [dets[i] for i in keep]


def top_k(dets: Sequence[Detection], k: int = TOP_K) -> list[Detection]:
    if k < 0:
        raise ValidationError(f"k must be >= 0, got {k}")
    dets = list(dets)
    return [dets[i] for i in _score_order(dets)[:k]] if dets else []


def postprocess_image(dets: Sequence[Detection], iou_thresh: float = NMS_IOU, k: int = TOP_K) -> list[Detection]:
    return top_k(nms(dets, iou_thresh), k)


def postprocess(
    dets: Iterable[Detection],
    iou_thresh: float = NMS_IOU,
    k: int = TOP_K,
    executor=None,
) -> list[Detection]:
    """NMS then top-k per image; images keep their first-appearance order."""
    groups = list(group_detections(dets).values())
    mapper = executor.map if executor is not None else map
    results = mapper(lambda g: postprocess_image(g, iou_thresh, k), groups)
    return [d for group in results for d in group]
