"""Object validation: is a detected blob plausibly a vehicle?

The default classifier is a geometric heuristic over the object's bbox:
aspect ratio, fill ratio, and frame-area fraction each have an accepted
band. The label comes from hard (inclusive) band membership; the score is
the product of three sub-scores that are 1.0 comfortably inside a band
and ramp linearly to 0 at its edge over a 10% (relative) margin.

Any callable with the classifier signature can replace the heuristic, so
a learned model can slot in without touching the pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .foreground import DetectedObject
from .imaging import Frame

VEHICLE = "vehicle"
NON_VEHICLE = "non-vehicle"


@dataclass(frozen=True)
class HeuristicParams:
    aspect_min: float = 0.5
    aspect_max: float = 4.0
    fill_min: float = 0.4
    area_min_frac: float = 0.001
    area_max_frac: float = 0.5

    def __post_init__(self):
        if not 0 < self.aspect_min <= self.aspect_max:
            raise ValueError("need 0 < aspect_min <= aspect_max")
        if not 0 < self.fill_min <= 1:
            raise ValueError("need 0 < fill_min <= 1")
        if not 0 < self.area_min_frac <= self.area_max_frac <= 1:
            raise ValueError("need 0 < area_min_frac <= area_max_frac <= 1")


@dataclass(frozen=True)
class ClassifierVerdict:
    label: str
    score: float


Classifier = Callable[[np.ndarray, DetectedObject], ClassifierVerdict]

_RAMP = 0.1  # relative width of the edge ramp


def _edge_ramp(x: float, lo: float, hi: float | None) -> float:
    """1.0 comfortably inside [lo, hi]; linear to 0 at either edge."""
    s = 1.0
    s = min(s, (x - lo) / (_RAMP * lo))
    if hi is not None:
        s = min(s, (hi - x) / (_RAMP * hi))
    return max(0.0, min(1.0, s))


def validate(
    object_image: np.ndarray,
    obj: DetectedObject,
    params: HeuristicParams,
    frame_area: int,
) -> ClassifierVerdict:
    """Geometric heuristic verdict for one object.

    ``object_image`` (the masked bbox crop) is unused here but part of the
    classifier signature so pixel-based classifiers are drop-in.
    """
    del object_image
    if obj.w <= 0 or obj.h <= 0 or frame_area <= 0:
        return ClassifierVerdict(NON_VEHICLE, 0.0)
    aspect = obj.w / obj.h
    fill = obj.area / (obj.w * obj.h)
    frac = obj.area / frame_area
    ok = (
        params.aspect_min <= aspect <= params.aspect_max
        and fill >= params.fill_min
        and params.area_min_frac <= frac <= params.area_max_frac
    )
    score = (
        _edge_ramp(aspect, params.aspect_min, params.aspect_max)
        * _edge_ramp(fill, params.fill_min, None)
        * _edge_ramp(frac, params.area_min_frac, params.area_max_frac)
    )
    return ClassifierVerdict(VEHICLE if ok else NON_VEHICLE, score)


def crop_object(masked_frame: Frame, obj: DetectedObject) -> np.ndarray:
    """The object's bbox cut out of the masked frame (read-only view)."""
    return masked_frame.pixels[obj.y : obj.y + obj.h, obj.x : obj.x + obj.w]


def classify_all(
    objects: list[DetectedObject],
    masked_frame: Frame,
    params: HeuristicParams | None = None,
    classifier: Classifier | None = None,
) -> list[DetectedObject]:
    """Label every object, preserving order. Objects are returned as
    labeled copies; inputs are never mutated."""
    if classifier is None:
        p = params if params is not None else HeuristicParams()
        frame_area = masked_frame.width * masked_frame.height

        def classifier(img, obj):
            return validate(img, obj, p, frame_area)

    out = []
    for obj in objects:
        verdict = classifier(crop_object(masked_frame, obj), obj)
        out.append(replace(obj, label=verdict.label, score=verdict.score))
    return out
