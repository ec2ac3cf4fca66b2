"""Axis-aligned box arithmetic.

Boxes use continuous corner coordinates ``(x1, y1, x2, y2)`` with the
origin at the top-left of the image. There is no ``+1`` pixel convention:
``area = (x2 - x1) * (y2 - y1)``.

The scalar functions (``iou``, ``ioa``) and the batched kernels
(``iou_matrix``, ``ioa_matrix``) evaluate the same floating point
expressions in the same order, so their results agree bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateBoxError, ValidationError

__all__ = [
    "BBox",
    "BoxDeltas",
    "iou",
    "ioa",
    "clip",
    "encode_deltas",
    "decode_deltas",
    "boxes_to_array",
    "array_to_boxes",
    "iou_matrix",
    "ioa_matrix",
    "encode_deltas_array",
    "decode_deltas_array",
]


@dataclass(frozen=True)
class BBox:
    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        coords = (self.x1, self.y1, self.x2, self.y2)
        if not all(math.isfinite(c) for c in coords):
            raise ValidationError(f"non-finite box coordinates {coords}")
        if self.x2 < self.x1 or self.y2 < self.y1:
            raise ValidationError(f"box has negative extent: {coords}")

    @classmethod
    def from_seq(cls, seq: Sequence[float]) -> "BBox":
        if len(seq) != 4:
            raise ValidationError(f"expected 4 box coordinates, got {len(seq)}")
        return cls(*(float(v) for v in seq))

    def width(self) -> float:
        return self.x2 - self.x1

    def height(self) -> float:
        return self.y2 - self.y1

    def area(self) -> float:
        return (self.x2 - self.x1) * (self.y2 - self.y1)

    def center(self) -> tuple[float, float]:
        return (self.x1 + 0.5 * self.width(), self.y1 + 0.5 * self.height())

    def to_list(self) -> list[float]:
        return [self.x1, self.y1, self.x2, self.y2]

    def intersection(self, other: "BBox") -> "BBox | None":
        """Overlap box, or None when the boxes do not touch."""
        x1 = max(self.x1, other.x1)
        y1 = max(self.y1, other.y1)
        x2 = min(self.x2, other.x2)
        y2 = min(self.y2, other.y2)
        if x2 < x1 or y2 < y1:
            return None
        return BBox(x1, y1, x2, y2)


@dataclass(frozen=True)
class BoxDeltas:
    """R-CNN regression parameterization relative to a reference box."""

    dx: float
    dy: float
    dw: float
    dh: float

    def to_list(self) -> list[float]:
        return [self.dx, self.dy, self.dw, self.dh]


def _inter_area(a: BBox, b: BBox) -> float:
    iw = max(0.0, min(a.x2, b.x2) - max(a.x1, b.x1))
    ih = max(0.0, min(a.y2, b.y2) - max(a.y1, b.y1))
    return iw * ih


def iou(a: BBox, b: BBox) -> float:
    inter = _inter_area(a, b)
    union = a.area() + b.area() - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def ioa(a: BBox, b: BBox) -> float:
    """Intersection over the area of ``a``."""
    area_a = a.area()
    if area_a <= 0.0:
        return 0.0
    return _inter_area(a, b) / area_a


def clip(b: BBox, width: float, height: float) -> BBox:
    if width <= 0 or height <= 0:
        raise ValidationError(f"clip bounds must be positive, got {width}x{height}")
    x1 = min(max(b.x1, 0.0), width)
    y1 = min(max(b.y1, 0.0), height)
    x2 = min(max(b.x2, 0.0), width)
    y2 = min(max(b.y2, 0.0), height)
    return BBox(x1, y1, x2, y2)


def _check_reference(ref: BBox, what: str) -> None:
    if ref.width() <= 0 or ref.height() <= 0:
        raise DegenerateBoxError(f"{what} must have positive width and height: {ref.to_list()}")


def encode_deltas(anchor: BBox, gt: BBox) -> BoxDeltas:
    _check_reference(anchor, "anchor")
    _check_reference(gt, "target box")
    aw, ah = anchor.width(), anchor.height()
    acx, acy = anchor.x1 + 0.5 * aw, anchor.y1 + 0.5 * ah
    gw, gh = gt.width(), gt.height()
    gcx, gcy = gt.x1 + 0.5 * gw, gt.y1 + 0.5 * gh
    return BoxDeltas(
        dx=(gcx - acx) / aw,
        dy=(gcy - acy) / ah,
        dw=math.log(gw / aw),
        dh=math.log(gh / ah),
    )


def decode_deltas(anchor: BBox, deltas: BoxDeltas) -> BBox:
    _check_reference(anchor, "anchor")
    aw, ah = anchor.width(), anchor.height()
    cx = anchor.x1 + 0.5 * aw + deltas.dx * aw
    cy = anchor.y1 + 0.5 * ah + deltas.dy * ah
    w = aw * math.exp(deltas.dw)
    h = ah * math.exp(deltas.dh)
    return BBox(cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h)


# ---------------------------------------------------------------------------
# batched kernels on (N, 4) float64 arrays


def boxes_to_array(boxes: Iterable[BBox] | np.ndarray) -> np.ndarray:
    if isinstance(boxes, np.ndarray):
        arr = np.asarray(boxes, dtype=np.float64)
    else:
        arr = np.array([b.to_list() for b in boxes], dtype=np.float64)
    return arr.reshape(-1, 4)


def array_to_boxes(arr: np.ndarray) -> list[BBox]:
    return [BBox(*map(float, row)) for row in np.asarray(arr, dtype=np.float64).reshape(-1, 4)]


def _areas(arr: np.ndarray) -> np.ndarray:
    return (arr[:, 2] - arr[:, 0]) * (arr[:, 3] - arr[:, 1])


def _inter_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    iw = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    ih = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    return np.maximum(iw, 0.0) * np.maximum(ih, 0.0)


def iou_matrix(a, b) -> np.ndarray:
    """Pairwise IoU, shape ``(len(a), len(b))``."""
    a = boxes_to_array(a)
    b = boxes_to_array(b)
    inter = _inter_matrix(a, b)
    union = _areas(a)[:, None] + _areas(b)[None, :] - inter
    out = np.zeros_like(inter)
    np.divide(inter, union, out=out, where=union > 0.0)
    return out


def ioa_matrix(a, b) -> np.ndarray:
    """Pairwise intersection over area of the row box."""
    a = boxes_to_array(a)
    b = boxes_to_array(b)
    inter = _inter_matrix(a, b)
    area_a = np.broadcast_to(_areas(a)[:, None], inter.shape)
    out = np.zeros_like(inter)
    np.divide(inter, area_a, out=out, where=area_a > 0.0)
    return out


def encode_deltas_array(anchors, gts) -> np.ndarray:
    """Row-wise ``encode_deltas`` for equally sized box arrays."""
    a = boxes_to_array(anchors)
    g = boxes_to_array(gts)
    aw, ah = a[:, 2] - a[:, 0], a[:, 3] - a[:, 1]
    gw, gh = g[:, 2] - g[:, 0], g[:, 3] - g[:, 1]
    if np.any(aw <= 0) or np.any(ah <= 0) or np.any(gw <= 0) or np.any(gh <= 0):
        raise DegenerateBoxError("encode_deltas_array needs boxes with positive extent")
    dx = ((g[:, 0] + 0.5 * gw) - (a[:, 0] + 0.5 * aw)) / aw
    dy = ((g[:, 1] + 0.5 * gh) - (a[:, 1] + 0.5 * ah)) / ah
    return np.stack([dx, dy, np.log(gw / aw), np.log(gh / ah)], axis=1)


def decode_deltas_array(anchors, deltas: np.ndarray) -> np.ndarray:
    a = boxes_to_array(anchors)
    d = np.asarray(deltas, dtype=np.float64).reshape(-1, 4)
    aw, ah = a[:, 2] - a[:, 0], a[:, 3] - a[:, 1]
    if np.any(aw <= 0) or np.any(ah <= 0):
        raise DegenerateBoxError("decode_deltas_array needs anchors with positive extent")
    cx = a[:, 0] + 0.5 * aw + d[:, 0] * aw
    cy = a[:, 1] + 0.5 * ah + d[:, 1] * ah
    w = aw * np.exp(d[:, 2])
    h = ah * np.exp(d[:, 3])
    return np.stack([cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h], axis=1)
