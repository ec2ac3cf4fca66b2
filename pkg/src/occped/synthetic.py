"""Seeded crowd scenes and a parameterized mock detector.

Scenes place pedestrians with a tall aspect ratio, optionally clustered
next to each other, and derive visible boxes by painting them in order on
a 1-pixel grid: later pedestrians occlude earlier ones. The mock detector
perturbs ground truths, drops some of them and can emit a high-scoring box
spanning each strongly overlapping pair, the typical crowd false positive.
"""

from __future__ import annotations

import zlib
from dataclasses import asdict, dataclass, fields
from typing import Sequence

import numpy as np

from .augmentation import RasterImage
from .dataset_io import Detection, ImageAnnotation, Instance
from .errors import ConfigError
from .geometry import BBox, iou_matrix


def _from_dict(cls, obj: dict | None):
    obj = obj or {}
    names = {f.name for f in fields(cls)}
    unknown = set(obj) - names
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} fields: {sorted(unknown)}")
    return cls(**obj)


@dataclass(frozen=True)
class SceneConfig:
    width: int = 640
    height: int = 480
    mean_count: float = 16.2
    min_height: float = 50.0
    max_height: float = 200.0
    aspect_mean: float = 2.44
    aspect_std: float = 0.25
    crowding: float = 0.5
    """Probability that a pedestrian is placed beside an earlier one instead of uniformly."""
    neighbour_offset: tuple[float, float] = (0.2, 0.9)
    """Horizontal offset range, in widths of the earlier pedestrian, for clustered placement."""
    head_height_ratio: float = 0.2
    head_width_ratio: float = 0.4
    seed: int | Sequence[int] = 0

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ConfigError("image size must be positive")
        if self.mean_count < 0:
            raise ConfigError("mean_count must be >= 0")
        if not (0 < self.min_height <= self.max_height):
            raise ConfigError("need 0 < min_height <= max_height")
        if self.max_height > self.height:
            raise ConfigError(f"max_height {self.max_height} exceeds image height {self.height}")
        min_aspect = self.aspect_mean - 3 * self.aspect_std
        if self.aspect_std < 0 or min_aspect <= 0:
            raise ConfigError("aspect ratio distribution must stay positive")
        if self.max_height / max(min_aspect, 0.5) > self.width:
            raise ConfigError("widest possible pedestrian does not fit in the image")
        if not (0.0 <= self.crowding <= 1.0):
            raise ConfigError("crowding must be in [0, 1]")
        lo, hi = self.neighbour_offset
        if not (0.0 <= lo <= hi):
            raise ConfigError("neighbour_offset must satisfy 0 <= lo <= hi")
        if not (0 < self.head_height_ratio <= 1 and 0 < self.head_width_ratio <= 1):
            raise ConfigError("head ratios must be in (0, 1]")

    @classmethod
    def from_dict(cls, obj: dict | None) -> "SceneConfig":
        obj = dict(obj or {})
        if "neighbour_offset" in obj:
            obj["neighbour_offset"] = tuple(obj["neighbour_offset"])
        return _from_dict(cls, obj)


@dataclass(frozen=True)
class MockDetectorConfig:
    noise: float = 0.05
    """Std of corner noise as a fraction of box width / height."""
    miss_prob: float = 0.0
    straddle_rate: float = 0.0
    straddle_iou: float = 0.3
    score_slope: float = 0.3
    score_ref: float = 0.1
    score_noise: float = 0.02
    straddle_score: tuple[float, float] = (0.8, 0.95)
    seed: int = 0

    def __post_init__(self):
        for name in ("miss_prob", "straddle_rate", "straddle_iou"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ConfigError(f"{name} must be in [0, 1], got {v}")
        if self.noise < 0 or self.score_noise < 0 or self.score_ref <= 0:
            raise ConfigError("noise terms must be >= 0 and score_ref > 0")
        lo, hi = self.straddle_score
        if not (0.0 <= lo <= hi <= 1.0):
            raise ConfigError("straddle_score must be a sub-range of [0, 1]")

    @classmethod
    def from_dict(cls, obj: dict | None) -> "MockDetectorConfig":
        obj = dict(obj or {})
        if "straddle_score" in obj:
            obj["straddle_score"] = tuple(obj["straddle_score"])
        return _from_dict(cls, obj)


def _place(cfg: SceneConfig, rng: np.random.Generator, placed: list[np.ndarray]) -> np.ndarray:
    h = rng.uniform(cfg.min_height, cfg.max_height)
    aspect = float(np.clip(rng.normal(cfg.aspect_mean, cfg.aspect_std),
                           cfg.aspect_mean - 3 * cfg.aspect_std, cfg.aspect_mean + 3 * cfg.aspect_std))
    w = h / aspect
    if placed and rng.random() < cfg.crowding:
        ref = placed[rng.integers(len(placed))]
        rw = ref[2] - ref[0]
        side = 1.0 if rng.random() < 0.5 else -1.0
        x1 = ref[0] + side * rng.uniform(*cfg.neighbour_offset) * rw
        # feet roughly on the same ground line as the neighbour
        y2 = ref[3] + rng.normal(0.0, 0.05 * h)
        y1 = y2 - h
    else:
        x1 = rng.uniform(0.0, cfg.width - w)
        y1 = rng.uniform(0.0, cfg.height - h)
    x1 = float(np.clip(x1, 0.0, cfg.width - w))
    y1 = float(np.clip(y1, 0.0, cfg.height - h))
    return np.array([x1, y1, x1 + w, y1 + h])


def _pixel_span(lo: float, hi: float, limit: int) -> tuple[int, int]:
    """Pixels whose centre lies in ``[lo, hi)``."""
    a = int(np.clip(np.ceil(lo - 0.5), 0, limit))
    b = int(np.clip(np.ceil(hi - 0.5), 0, limit))
    return a, max(a, b)


def paint_labels(boxes: np.ndarray, width: int, height: int) -> np.ndarray:
    """Painter-order label map: entry is the index of the topmost box, -1 for background."""
    labels = np.full((height, width), -1, dtype=np.int32)
    for k, (x1, y1, x2, y2) in enumerate(boxes):
        c0, c1 = _pixel_span(x1, x2, width)
        r0, r1 = _pixel_span(y1, y2, height)
        labels[r0:r1, c0:c1] = k
    return labels


def visible_boxes(boxes: np.ndarray, width: int, height: int) -> list[BBox]:
    """Bounding box of each box's unoccluded pixels.

    Where the unoccluded pixels reach the box's own outermost pixel on a
    side, the exact box edge is used, so an unoccluded box is returned
    unchanged. Fully hidden boxes get a zero-area visible box.
    """
    labels = paint_labels(boxes, width, height)
    out = []
    for k, (x1, y1, x2, y2) in enumerate(boxes):
        c0, c1 = _pixel_span(x1, x2, width)
        r0, r1 = _pixel_span(y1, y2, height)
        rows, cols = np.nonzero(labels[r0:r1, c0:c1] == k)
        if rows.size == 0:
            out.append(BBox(x1, y1, x1, y1))
            continue
        vx1 = x1 if cols.min() == 0 else max(float(c0 + cols.min()), x1)
        vy1 = y1 if rows.min() == 0 else max(float(r0 + rows.min()), y1)
        vx2 = x2 if cols.max() == c1 - c0 - 1 else min(float(c0 + cols.max() + 1), x2)
        vy2 = y2 if rows.max() == r1 - r0 - 1 else min(float(r0 + rows.max() + 1), y2)
        out.append(BBox(vx1, vy1, max(vx1, vx2), max(vy1, vy2)))
    return out


def generate_scene(cfg: SceneConfig, image_id: str | None = None) -> ImageAnnotation:
    rng = np.random.default_rng(cfg.seed)
    if image_id is None:
        seed = cfg.seed if isinstance(cfg.seed, int) else "_".join(map(str, cfg.seed))
        image_id = f"synth_{seed}"
    n = int(rng.poisson(cfg.mean_count)) if cfg.mean_count > 0 else 0
    placed: list[np.ndarray] = []
    for _ in range(n):
        placed.append(_place(cfg, rng, placed))
    boxes = np.array(placed, dtype=np.float64).reshape(-1, 4)
    visible = visible_boxes(boxes, cfg.width, cfg.height)
    instances = []
    for k, (row, vis) in enumerate(zip(boxes, visible)):
        full = BBox(*map(float, row))
        hw = cfg.head_width_ratio * full.width()
        cx = full.x1 + 0.5 * full.width()
        head = BBox(cx - 0.5 * hw, full.y1, cx + 0.5 * hw, full.y1 + cfg.head_height_ratio * full.height())
        instances.append(Instance(full=full, visible=vis, head=head, ignore=False, id=k))
    return ImageAnnotation(image_id, cfg.width, cfg.height, tuple(instances))


def render_scene(ann: ImageAnnotation, seed: int = 0, background: int = 90) -> RasterImage:
    """Flat-coloured pedestrians in painter order over a grey background."""
    rng = np.random.default_rng(seed)
    img = RasterImage.blank(ann.width, ann.height, background)
    for inst in ann.instances:
        color = rng.integers(0, 256, size=3, dtype=np.uint8)
        c0, c1 = _pixel_span(inst.full.x1, inst.full.x2, ann.width)
        r0, r1 = _pixel_span(inst.full.y1, inst.full.y2, ann.height)
        img.pixels[r0:r1, c0:c1] = color
    return img


def image_rng(seed: int, image_id: str) -> np.random.Generator:
    """Per-image generator, independent of the order images are processed in."""
    return np.random.default_rng([int(seed), zlib.crc32(image_id.encode("utf-8"))])


def mock_detect(ann: ImageAnnotation, cfg: MockDetectorConfig) -> list[Detection]:
    rng = image_rng(cfg.seed, ann.image_id)
    gts = [inst.full for inst in ann.instances if not inst.ignore]
    dets = []
    for gt in gts:
        miss_draw = rng.random()
        z = rng.normal(size=4)
        score_jitter = rng.normal(0.0, cfg.score_noise) if cfg.score_noise > 0 else 0.0
        if miss_draw < cfg.miss_prob:
            continue
        w, h = gt.width(), gt.height()
        offs = cfg.noise * z * np.array([w, h, w, h])
        x1, y1, x2, y2 = np.array(gt.to_list()) + offs
        x1, x2 = sorted((float(np.clip(x1, 0, ann.width)), float(np.clip(x2, 0, ann.width))))
        y1, y2 = sorted((float(np.clip(y1, 0, ann.height)), float(np.clip(y2, 0, ann.height))))
        if x2 <= x1 or y2 <= y1:
            continue
        magnitude = float(np.mean(np.abs(offs / np.array([w, h, w, h]))))
        score = 1.0 - cfg.score_slope * magnitude / cfg.score_ref + score_jitter
        dets.append(Detection(ann.image_id, BBox(x1, y1, x2, y2), float(np.clip(score, 0.0, 1.0))))

    if cfg.straddle_rate > 0 and len(gts) > 1:
        ious = iou_matrix(gts, gts)
        lo, hi = cfg.straddle_score
        for i in range(len(gts)):
            for j in range(i + 1, len(gts)):
                if ious[i, j] <= cfg.straddle_iou:
                    continue
                emit = rng.random() < cfg.straddle_rate
                score = rng.uniform(lo, hi)
                if emit:
                    a, b = gts[i], gts[j]
                    union = BBox(min(a.x1, b.x1), min(a.y1, b.y1), max(a.x2, b.x2), max(a.y2, b.y2))
                    dets.append(Detection(ann.image_id, union, float(score)))
    return dets


def generate_dataset(
    scene_cfg: SceneConfig, n_images: int, seed: int, executor=None
) -> list[ImageAnnotation]:
    """``n_images`` scenes; scene ``i`` is seeded with ``(seed, i)``."""
    base = asdict(scene_cfg)
    base["neighbour_offset"] = tuple(base["neighbour_offset"])

    def one(i: int) -> ImageAnnotation:
        cfg = SceneConfig(**{**base, "seed": (int(seed), i)})
        return generate_scene(cfg, image_id=f"synth_{i:05d}")

    mapper = executor.map if executor is not None else map
    return list(mapper(one, range(n_images)))
