"""Occlusion-simulated augmentation.

Every ground truth is split into five parts: a head band on top, a torso
band split at the vertical midline into left and right halves, and a leg
band split the same way. With probability ``p`` one non-head part of a
ground truth is painted with a constant fill colour.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, DegenerateBoxError, ValidationError
from .geometry import BBox

IMAGENET_MEAN_RGB = (123.675, 116.28, 103.53)


class Part(str, enum.Enum):
    HEAD = "head"
    LEFT_UPPER = "left_upper"
    RIGHT_UPPER = "right_upper"
    LEFT_LEG = "left_leg"
    RIGHT_LEG = "right_leg"


OCCLUDABLE_PARTS = (Part.LEFT_UPPER, Part.RIGHT_UPPER, Part.LEFT_LEG, Part.RIGHT_LEG)


@dataclass(frozen=True)
class PartRatios:
    """Fractions of box height for the head and torso bands; legs take the rest."""

    head: float = 0.2
    torso: float = 0.4

    def __post_init__(self):
        if self.head <= 0 or self.torso <= 0 or self.head + self.torso >= 1:
            raise ConfigError(f"invalid part ratios head={self.head}, torso={self.torso}")


@dataclass(frozen=True)
class PartRegion:
    part: Part
    region: BBox


def part_regions(gt: BBox, ratios: PartRatios = PartRatios()) -> list[PartRegion]:
    if gt.area() <= 0:
        raise DegenerateBoxError(f"cannot split a zero-area box: {gt.to_list()}")
    h = gt.height()
    y_head = gt.y1 + ratios.head * h
    y_legs = y_head + ratios.torso * h
    xm = gt.x1 + 0.5 * gt.width()
    return [
        PartRegion(Part.HEAD, BBox(gt.x1, gt.y1, gt.x2, y_head)),
        PartRegion(Part.LEFT_UPPER, BBox(gt.x1, y_head, xm, y_legs)),
        PartRegion(Part.RIGHT_UPPER, BBox(xm, y_head, gt.x2, y_legs)),
        PartRegion(Part.LEFT_LEG, BBox(gt.x1, y_legs, xm, gt.y2)),
        PartRegion(Part.RIGHT_LEG, BBox(xm, y_legs, gt.x2, gt.y2)),
    ]


def part_region(gt: BBox, part: Part, ratios: PartRatios = PartRatios()) -> BBox:
    return next(r.region for r in part_regions(gt, ratios) if r.part is part)


@dataclass(frozen=True)
class OcclusionPlan:
    decisions: tuple[Part | None, ...]
    fill: tuple[float, float, float] = IMAGENET_MEAN_RGB
    seed: int | None = None

    def __post_init__(self):
        if any(d is Part.HEAD for d in self.decisions):
            raise ValidationError("the head part can never be occluded")

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "fill": list(self.fill),
            "decisions": [d.value if d is not None else None for d in self.decisions],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "OcclusionPlan":
        return cls(
            decisions=tuple(Part(d) if d is not None else None for d in obj["decisions"]),
            fill=tuple(float(v) for v in obj["fill"]),
            seed=obj.get("seed"),
        )


def plan_occlusion(
    gts: Sequence[BBox],
    p: float = 0.5,
    seed: int | None = None,
    fill: Sequence[float] = IMAGENET_MEAN_RGB,
    rng: np.random.Generator | None = None,
) -> OcclusionPlan:
    """Occlude each GT independently with probability ``p``.

    The occluded part is uniform over the four non-head parts.
    """
    if not (0.0 <= p <= 1.0):
        raise ConfigError(f"occlusion probability must be in [0, 1], got {p}")
    if rng is None:
        rng = np.random.default_rng(seed)
    n = len(gts)
    occluded = rng.random(n) < p
    choice = rng.integers(0, len(OCCLUDABLE_PARTS), size=n)
    decisions = tuple(
        OCCLUDABLE_PARTS[c] if o else None for o, c in zip(occluded.tolist(), choice.tolist())
    )
    return OcclusionPlan(decisions=decisions, fill=tuple(float(v) for v in fill), seed=seed)


@dataclass
class RasterImage:
    """``height x width x 3`` pixel buffer, row-major."""

    pixels: np.ndarray

    def __post_init__(self):
        if self.pixels.ndim != 3 or self.pixels.shape[2] != 3:
            raise ValidationError(f"expected an HxWx3 buffer, got shape {self.pixels.shape}")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def channels(self) -> int:
        return 3

    @classmethod
    def blank(cls, width: int, height: int, value=0, dtype=np.uint8) -> "RasterImage":
        return cls(np.full((height, width, 3), value, dtype=dtype))

    def copy(self) -> "RasterImage":
        return RasterImage(self.pixels.copy())


def pixel_rect(region: BBox, width: int, height: int) -> tuple[int, int, int, int]:
    """Outer pixel bounds ``(c0, r0, c1, r1)``, end-exclusive and clipped to the image."""
    c0 = min(max(math.floor(region.x1), 0), width)
    r0 = min(max(math.floor(region.y1), 0), height)
    c1 = min(max(math.ceil(region.x2), 0), width)
    r1 = min(max(math.ceil(region.y2), 0), height)
    return c0, r0, max(c0, c1), max(r0, r1)


def inner_pixel_rect(region: BBox, width: int, height: int) -> tuple[int, int, int, int]:
    """Pixels lying entirely inside ``region``; same layout as ``pixel_rect``."""
    c0 = min(max(math.ceil(region.x1), 0), width)
    r0 = min(max(math.ceil(region.y1), 0), height)
    c1 = min(max(math.floor(region.x2), 0), width)
    r1 = min(max(math.floor(region.y2), 0), height)
    return c0, r0, max(c0, c1), max(r0, r1)


def _fill_value(fill: Sequence[float], dtype) -> np.ndarray:
    value = np.asarray(fill, dtype=np.float64)
    if np.issubdtype(dtype, np.integer):
        info = np.iinfo(dtype)
        value = np.clip(np.round(value), info.min, info.max)
    return value.astype(dtype)


def apply_occlusion(
    img: RasterImage,
    gts: Sequence[BBox],
    plan: OcclusionPlan,
    ratios: PartRatios = PartRatios(),
) -> RasterImage:
    """Return a copy of ``img`` with every planned part painted with the fill colour.

    Part regions are discretized outward (floor on the min corner, ceil on
    the max corner) and clipped to the image. Integer buffers receive the
    rounded fill colour.
    """
    if len(plan.decisions) != len(gts):
        raise ValidationError(
            f"plan has {len(plan.decisions)} decisions for {len(gts)} ground truths"
        )
    out = img.copy()
    fill = _fill_value(plan.fill, out.pixels.dtype)
    for gt, part in zip(gts, plan.decisions):
        if part is None:
            continue
        c0, r0, c1, r1 = pixel_rect(part_region(gt, part, ratios), out.width, out.height)
        out.pixels[r0:r1, c0:c1] = fill
    return out


def blanked_area_fraction(
    gts: Sequence[BBox], plan: OcclusionPlan, ratios: PartRatios = PartRatios()
) -> float:
    """Continuous area of planned parts over the total GT area."""
    total = sum(g.area() for g in gts)
    if total <= 0:
        return 0.0
    blanked = sum(part_region(g, d, ratios).area() for g, d in zip(gts, plan.decisions) if d is not None)
    return blanked / total


# ---------------------------------------------------------------------------
# raster files


def read_raster(path) -> RasterImage:
    from PIL import Image

    with Image.open(path) as im:
        return RasterImage(np.asarray(im.convert("RGB"), dtype=np.uint8).copy())


def write_raster(img: RasterImage, path) -> None:
    """Write an 8-bit raster; ``.ppm`` gives binary P6, other suffixes go through Pillow."""
    path = Path(path)
    pixels = img.pixels
    if pixels.dtype != np.uint8:
        pixels = np.clip(np.round(pixels), 0, 255).astype(np.uint8)
    if path.suffix.lower() == ".ppm":
        header = f"P6\n{img.width} {img.height}\n255\n".encode("ascii")
        path.write_bytes(header + np.ascontiguousarray(pixels).tobytes())
        return
    from PIL import Image

    Image.fromarray(pixels, mode="RGB").save(path)


def write_plan(plans: dict[str, OcclusionPlan], path) -> None:
    Path(path).write_text(
        json.dumps({k: v.to_dict() for k, v in plans.items()}, indent=1) + "\n", encoding="utf-8"
    )
