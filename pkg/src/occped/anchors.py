"""Single-scale-per-level anchor lattice over a feature pyramid."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, DegenerateBoxError
from .geometry import BBox

DEFAULT_STRIDES = (4, 8, 16, 32, 64)
ANCHOR_SCALE_FACTOR = 8

# aspect ratio is height / width
PEDESTRIAN_RATIOS = (2.44,)  # CityPersons, Caltech-USA
CROWD_RATIOS = (0.5, 1.0, 2.0)  # CrowdHuman, SUR-PED


@dataclass(frozen=True)
class AnchorLevel:
    stride: int
    scale: float
    grid_w: int
    grid_h: int


@dataclass(frozen=True)
class AnchorGrid:
    image_w: int
    image_h: int
    levels: tuple[AnchorLevel, ...]
    aspect_ratios: tuple[float, ...]
    anchors: tuple[np.ndarray, ...]
    """Per level, an ``(grid_h * grid_w * n_ratios, 4)`` array ordered by row, column, ratio."""

    def __len__(self) -> int:
        return sum(len(a) for a in self.anchors)

    def all_anchors(self) -> np.ndarray:
        return np.concatenate(self.anchors, axis=0)


def _level_anchors(stride: int, grid_w: int, grid_h: int, ratios: np.ndarray) -> np.ndarray:
    scale = float(ANCHOR_SCALE_FACTOR * stride)
    sqrt_r = np.sqrt(ratios)
    half_w = 0.5 * scale / sqrt_r
    half_h = 0.5 * scale * sqrt_r
    cx = (np.arange(grid_w, dtype=np.float64) + 0.5) * stride
    cy = (np.arange(grid_h, dtype=np.float64) + 0.5) * stride
    # (grid_h, grid_w, n_ratios)
    cyy, cxx, _ = np.meshgrid(cy, cx, ratios, indexing="ij")
    hw = np.broadcast_to(half_w, cxx.shape)
    hh = np.broadcast_to(half_h, cxx.shape)
    out = np.stack([cxx - hw, cyy - hh, cxx + hw, cyy + hh], axis=-1)
    return out.reshape(-1, 4)


def generate_anchor_grid(
    image_w: int,
    image_h: int,
    strides: Sequence[int] = DEFAULT_STRIDES,
    aspect_ratios: Sequence[float] = CROWD_RATIOS,
) -> AnchorGrid:
    """Build anchors of side ``8 * stride`` centred on every feature cell.

    Each ratio ``r`` gives a ``8S / sqrt(r)`` by ``8S * sqrt(r)`` box, so all
    anchors on a level share the area ``(8S)**2``. Anchors are not clipped to
    the image.
    """
    strides = [int(s) for s in strides]
    ratios = np.asarray(list(aspect_ratios), dtype=np.float64)
    if not strides:
        raise ConfigError("at least one stride is required")
    if ratios.size == 0:
        raise ConfigError("at least one aspect ratio is required")
    if any(s <= 0 for s in strides) or any(b <= a for a, b in zip(strides, strides[1:])):
        raise ConfigError(f"strides must be positive and strictly ascending, got {strides}")
    if np.any(~np.isfinite(ratios)) or np.any(ratios <= 0):
        raise ConfigError(f"aspect ratios must be positive, got {ratios.tolist()}")
    if image_w <= 0 or image_h <= 0:
        raise ConfigError(f"image size must be positive, got {image_w}x{image_h}")

    levels, anchors = [], []
    for s in strides:
        gw, gh = math.ceil(image_w / s), math.ceil(image_h / s)
        levels.append(AnchorLevel(stride=s, scale=float(ANCHOR_SCALE_FACTOR * s), grid_w=gw, grid_h=gh))
        anchors.append(_level_anchors(s, gw, gh, ratios))
    return AnchorGrid(
        image_w=image_w,
        image_h=image_h,
        levels=tuple(levels),
        aspect_ratios=tuple(float(r) for r in ratios),
        anchors=tuple(anchors),
    )


def level_for_scale(box: BBox, grid: AnchorGrid) -> int:
    """Index of the level whose anchor scale is log-closest to ``sqrt(area)``."""
    area = box.area()
    if area <= 0:
        raise DegenerateBoxError(f"box has zero area: {box.to_list()}")
    size = math.sqrt(area)
    dist = [abs(math.log(size / lvl.scale)) for lvl in grid.levels]
    return int(np.argmin(dist))
