"""Annotation and detection files, occlusion ratios and evaluation subsets.

Both file formats are JSON lines. Annotations (``.odann``)::

    {"ID": "img0", "width": 640, "height": 480,
     "gtboxes": [{"fbox": [x1, y1, x2, y2], "vbox": [...] | null,
                  "hbox": [...] | null, "ignore": 0 | 1}]}

Detections (``.oddet``)::

    {"ID": "img0", "dtboxes": [{"box": [x1, y1, x2, y2], "score": 0.93}]}

Boxes are corner-format floats (not the ``[x, y, w, h]`` of CrowdHuman's
ODGT files).
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator

from .errors import DegenerateBoxError, ParseError, ValidationError
from .geometry import BBox

__all__ = [
    "Instance",
    "ImageAnnotation",
    "Detection",
    "SubsetSpec",
    "REASONABLE",
    "HEAVY_OCCLUSION",
    "ALL",
    "SUBSETS",
    "parse_annotations",
    "write_annotations",
    "parse_detections",
    "write_detections",
    "read_annotations",
    "read_detections",
    "group_detections",
    "occlusion_ratio",
    "partition_for_eval",
    "subset_from_name",
]


@dataclass(frozen=True)
class Instance:
    full: BBox
    visible: BBox | None = None
    head: BBox | None = None
    ignore: bool = False
    id: int = 0


@dataclass(frozen=True)
class ImageAnnotation:
    image_id: str
    width: int
    height: int
    instances: tuple[Instance, ...] = ()

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValidationError(
                f"image {self.image_id!r}: size must be positive, got {self.width}x{self.height}"
            )
        object.__setattr__(self, "instances", tuple(self.instances))
        ids = [inst.id for inst in self.instances]
        if len(set(ids)) != len(ids):
            raise ValidationError(f"image {self.image_id!r}: duplicate instance ids")
        for inst in self.instances:
            if inst.head is not None and inst.head.area() <= 0:
                raise ValidationError(
                    f"image {self.image_id!r}, instance {inst.id}: head box has zero area"
                )


@dataclass(frozen=True)
class Detection:
    image_id: str
    box: BBox
    score: float

    def __post_init__(self):
        if not (math.isfinite(self.score) and 0.0 <= self.score <= 1.0):
            raise ValidationError(
                f"image {self.image_id!r}: detection score {self.score} outside [0, 1]"
            )


@dataclass(frozen=True)
class SubsetSpec:
    """Height and occlusion filter deciding which instances are evaluated.

    The occlusion range is half-open ``[occ_lo, occ_hi)``, except that an
    upper bound of exactly 1 also admits fully occluded instances.
    """

    min_height: float = 0.0
    occ_lo: float = 0.0
    occ_hi: float = 1.0
    name: str = field(default="custom", compare=False)

    def __post_init__(self):
        if self.min_height < 0:
            raise ValidationError(f"min_height must be >= 0, got {self.min_height}")
        if not (0.0 <= self.occ_lo < self.occ_hi <= 1.0):
            raise ValidationError(
                f"occlusion range must satisfy 0 <= lo < hi <= 1, got [{self.occ_lo}, {self.occ_hi})"
            )

    def admits_occlusion(self, occ: float) -> bool:
        if self.occ_lo <= occ < self.occ_hi:
            return True
        return self.occ_hi == 1.0 and occ == 1.0


REASONABLE = SubsetSpec(50.0, 0.0, 0.35, name="reasonable")
HEAVY_OCCLUSION = SubsetSpec(50.0, 0.35, 0.8, name="heavy")
ALL = SubsetSpec(0.0, 0.0, 1.0, name="all")
SUBSETS = {s.name: s for s in (REASONABLE, HEAVY_OCCLUSION, ALL)}


# ---------------------------------------------------------------------------
# parsing helpers


def _iter_lines(stream: str | IO[str] | Iterable[str]) -> Iterator[tuple[int, str]]:
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    for lineno, line in enumerate(stream, start=1):
        line = line.strip()
        if line:
            yield lineno, line


def _load_line(line: str, lineno: int) -> dict:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc.msg}", lineno) from None
    if not isinstance(obj, dict):
        raise ParseError("expected a JSON object", lineno)
    return obj


def _box(value, where: str) -> BBox | None:
    if value is None:
        return None
    if not isinstance(value, (list, tuple)):
        raise ValidationError(f"{where}: box must be a list of 4 numbers")
    try:
        return BBox.from_seq(value)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{where}: {exc}") from None


def _annotation_from_obj(obj: dict, lineno: int) -> ImageAnnotation:
    try:
        image_id = str(obj["ID"])
        width = int(obj["width"])
        height = int(obj["height"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"missing or invalid image field: {exc}", lineno) from None
    instances = []
    for k, gt in enumerate(obj.get("gtboxes") or []):
        where = f"image {image_id!r}, instance {k}"
        if not isinstance(gt, dict) or "fbox" not in gt:
            raise ValidationError(f"{where}: missing fbox")
        instances.append(
            Instance(
                full=_box(gt["fbox"], where + " fbox"),
                visible=_box(gt.get("vbox"), where + " vbox"),
                head=_box(gt.get("hbox"), where + " hbox"),
                ignore=bool(gt.get("ignore", 0)),
                id=k,
            )
        )
    return ImageAnnotation(image_id, width, height, tuple(instances))


def parse_annotations(stream) -> list[ImageAnnotation]:
    """Parse annotation JSON lines from a string, file object or line iterable."""
    return [_annotation_from_obj(_load_line(line, n), n) for n, line in _iter_lines(stream)]


def _annotation_to_obj(ann: ImageAnnotation) -> dict:
    gtboxes = []
    for inst in sorted(ann.instances, key=lambda i: i.id):
        gtboxes.append(
            {
                "fbox": inst.full.to_list(),
                "vbox": inst.visible.to_list() if inst.visible is not None else None,
                "hbox": inst.head.to_list() if inst.head is not None else None,
                "ignore": int(inst.ignore),
            }
        )
    return {"ID": ann.image_id, "width": ann.width, "height": ann.height, "gtboxes": gtboxes}


def write_annotations(annotations: Iterable[ImageAnnotation]) -> str:
    return "".join(json.dumps(_annotation_to_obj(a)) + "\n" for a in annotations)


def parse_detections(stream) -> list[Detection]:
    """Parse detection JSON lines.

    An image id may appear on several lines; the detections are
    concatenated in file order.
    """
    dets = []
    for lineno, line in _iter_lines(stream):
        obj = _load_line(line, lineno)
        try:
            image_id = str(obj["ID"])
        except KeyError:
            raise ParseError("missing ID", lineno) from None
        for k, d in enumerate(obj.get("dtboxes") or []):
            where = f"image {image_id!r}, detection {k}"
            try:
                score = float(d["score"])
                box = _box(d["box"], where)
            except (KeyError, TypeError) as exc:
                raise ValidationError(f"{where}: missing or invalid field {exc}") from None
            dets.append(Detection(image_id, box, score))
    return dets


def write_detections(detections: Iterable[Detection]) -> str:
    """Serialize detections, one line per run of consecutive equal image ids.

    Writing runs instead of grouping keeps ``parse_detections`` an exact
    inverse for any ordering of the input.
    """
    lines = []
    current_id = None
    run: list[dict] = []
    for det in detections:
        if det.image_id != current_id and run:
            lines.append(json.dumps({"ID": current_id, "dtboxes": run}))
            run = []
        current_id = det.image_id
        run.append({"box": det.box.to_list(), "score": det.score})
    if run:
        lines.append(json.dumps({"ID": current_id, "dtboxes": run}))
    return "".join(line + "\n" for line in lines)


def read_annotations(path) -> list[ImageAnnotation]:
    with open(path, encoding="utf-8") as fh:
        return parse_annotations(fh)


def read_detections(path) -> list[Detection]:
    with open(path, encoding="utf-8") as fh:
        return parse_detections(fh)


def group_detections(detections: Iterable[Detection]) -> dict[str, list[Detection]]:
    """Bucket detections by image id, preserving their relative order."""
    out: dict[str, list[Detection]] = {}
    for det in detections:
        out.setdefault(det.image_id, []).append(det)
    return out


# ---------------------------------------------------------------------------
# occlusion and subsets


def occlusion_ratio(inst: Instance) -> float:
    full_area = inst.full.area()
    if full_area <= 0:
        raise DegenerateBoxError(f"instance {inst.id}: full box has zero area")
    if inst.visible is None:
        return 0.0
    vis = inst.visible.intersection(inst.full)
    if vis is None:
        return 1.0
    return min(1.0, max(0.0, 1.0 - vis.area() / full_area))


def partition_for_eval(
    ann: ImageAnnotation, spec: SubsetSpec
) -> tuple[list[Instance], list[Instance]]:
    """Split instances into (evaluated, ignored) for the given subset."""
    evaluate, ignore = [], []
    for inst in ann.instances:
        keep = (
            not inst.ignore
            and inst.full.height() >= spec.min_height
            and inst.full.area() > 0
            and spec.admits_occlusion(occlusion_ratio(inst))
        )
        (evaluate if keep else ignore).append(inst)
    return evaluate, ignore


def subset_from_name(name: str, min_height=None, occ_lo=None, occ_hi=None) -> SubsetSpec:
    if name == "custom":
        return SubsetSpec(
            min_height=0.0 if min_height is None else float(min_height),
            occ_lo=0.0 if occ_lo is None else float(occ_lo),
            occ_hi=1.0 if occ_hi is None else float(occ_hi),
        )
    try:
        return SUBSETS[name]
    except KeyError:
        raise ValidationError(f"unknown subset {name!r}; choose from {sorted(SUBSETS)} or custom") from None

