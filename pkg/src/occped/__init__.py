"""Data pipeline and evaluation tooling for occluded pedestrian detection.

Covers annotation I/O, anchor generation, strict sample matching with
ground-truth jittering, occlusion-simulated augmentation, head-mask
targets and losses, NMS post-processing and the log-average miss rate.
"""

__version__ = "0.1.0"

from .dataset_io import (  # noqa: E402
    ALL,
    HEAVY_OCCLUSION,
    REASONABLE,
    Detection,
    ImageAnnotation,
    Instance,
    SubsetSpec,
)
from .errors import ConfigError, DegenerateBoxError, OccpedError, ParseError, ValidationError  # noqa: E402
from .evaluation import evaluate_dataset, log_average_miss_rate  # noqa: E402
from .geometry import BBox, BoxDeltas, ioa, iou  # noqa: E402
