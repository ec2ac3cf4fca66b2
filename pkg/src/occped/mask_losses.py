"""Head-mask supervision targets and the training loss terms.

The mask target for a proposal is the head box, rasterized on an
``m x m`` grid laid over the proposal. A cell is on when its centre falls
inside the head box. The mask branch is trained with average binary
cross-entropy; classification and box regression use cross-entropy and
smooth-L1 as in Fast R-CNN.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, DegenerateBoxError, ValidationError
from .geometry import BBox, BoxDeltas

MASK_SIZE = 28
EPS = 1e-7


def rasterize_head_mask(proposal: BBox, head: BBox | None, m: int = MASK_SIZE) -> np.ndarray:
    """Binary ``(m, m)`` uint8 mask, rows along y and columns along x."""
    if m < 1:
        raise ConfigError(f"mask size must be >= 1, got {m}")
    if proposal.width() <= 0 or proposal.height() <= 0:
        raise DegenerateBoxError(f"proposal must have positive extent: {proposal.to_list()}")
    if head is None:
        return np.zeros((m, m), dtype=np.uint8)
    centers = (np.arange(m, dtype=np.float64) + 0.5) / m
    xs = proposal.x1 + centers * proposal.width()
    ys = proposal.y1 + centers * proposal.height()
    in_x = (xs >= head.x1) & (xs <= head.x2)
    in_y = (ys >= head.y1) & (ys <= head.y2)
    return (in_y[:, None] & in_x[None, :]).astype(np.uint8)


def _check_pair(pred, target) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    if p.shape != t.shape:
        raise ValidationError(f"shape mismatch: prediction {p.shape} vs target {t.shape}")
    if p.size == 0:
        raise ValidationError("empty mask")
    if not np.all(np.isfinite(p)):
        raise ValidationError("non-finite mask prediction")
    return p, t


def bce_loss(pred, target, eps: float = EPS) -> float:
    """Mean binary cross-entropy with predictions clamped to ``[eps, 1 - eps]``."""
    p, t = _check_pair(pred, target)
    p = np.clip(p, eps, 1.0 - eps)
    return float(-np.mean(t * np.log(p) + (1.0 - t) * np.log1p(-p)))


def bce_grad(pred, target, eps: float = EPS) -> np.ndarray:
    """Derivative of ``bce_loss`` with respect to each prediction cell.

    Equals ``(p - t) / (p * (1 - p)) / N`` inside the clamp range and zero
    where the clamp is active.
    """
    p, t = _check_pair(pred, target)
    grad = (p - t) / (p * (1.0 - p)) / p.size
    clamped = (p < eps) | (p > 1.0 - eps)
    return np.where(clamped, 0.0, grad)


def cls_loss(scores: Sequence[float], label: int, eps: float = EPS) -> float:
    """Cross-entropy ``-log p[label]`` for a probability vector."""
    p = np.asarray(scores, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ValidationError("scores must be a non-empty 1-D probability vector")
    if not np.all(np.isfinite(p)):
        raise ValidationError("non-finite class probability")
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-6:
        raise ValidationError(f"class probabilities must be >= 0 and sum to 1, got sum {p.sum()}")
    if not (0 <= label < p.size):
        raise ValidationError(f"label {label} out of range for {p.size} classes")
    return float(-math.log(max(p[label], eps)))


def smooth_l1(d: float | np.ndarray, beta: float = 1.0):
    d = np.abs(d)
    return np.where(d < beta, 0.5 * d * d / beta, d - 0.5 * beta)


def _as_vec(d) -> np.ndarray:
    if isinstance(d, BoxDeltas):
        d = d.to_list()
    v = np.asarray(d, dtype=np.float64).reshape(-1)
    if v.shape != (4,):
        raise ValidationError(f"expected 4 box deltas, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValidationError("non-finite box delta")
    return v


def box_loss(pred: BoxDeltas | Sequence[float], target: BoxDeltas | Sequence[float]) -> float:
    """Smooth-L1 summed over the four delta components."""
    return float(np.sum(smooth_l1(_as_vec(pred) - _as_vec(target))))


@dataclass(frozen=True)
class LossConfig:
    box_weight: float = 1.0
    mask_weight: float = 1.0

    def __post_init__(self):
        if self.box_weight < 0 or self.mask_weight < 0:
            raise ConfigError("loss weights must be non-negative")


@dataclass(frozen=True)
class LossBreakdown:
    cls: float
    box: float
    mask: float
    total: float


def total_loss(l_cls: float, l_box: float, l_mask: float, cfg: LossConfig = LossConfig()) -> LossBreakdown:
    for name, v in (("cls", l_cls), ("box", l_box), ("mask", l_mask)):
        if not (math.isfinite(v) and v >= 0):
            raise ValidationError(f"{name} loss must be finite and non-negative, got {v}")
    total = l_cls + cfg.box_weight * l_box + cfg.mask_weight * l_mask
    return LossBreakdown(cls=l_cls, box=l_box, mask=l_mask, total=total)
