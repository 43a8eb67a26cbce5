"""Shared plumbing: grid resolution and per-frame detection.

Both the CLI and the benchmark harness run the same chain per frame:
subtract -> median cleanup -> connected components -> classify. Results
are deterministic for a given input regardless of the jobs count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

from .background import BackgroundModel
from .blocks import (
    DELTA_H_HIGH,
    DELTA_H_LOW,
    BlockGrid,
    make_grid,
    select_grid,
)
from .errors import SequenceTooShort
from .foreground import (
    DEFAULT_MIN_AREA_FRAC,
    DEFAULT_SUBTRACT_SHIFT,
    DEFAULT_WINDOW,
    DetectedObject,
    ForegroundMask,
    apply_mask,
    connected_components,
    make_mask,
)
from .imaging import Frame
from .validation import VEHICLE, HeuristicParams, classify_all


@dataclass(frozen=True)
class PipelineParams:
    """Knobs for the detection side of the pipeline (model side lives in
    ComparatorConfig)."""

    grid: int | None = None  # None = auto from entropy delta
    grid_low: float = DELTA_H_LOW
    grid_high: float = DELTA_H_HIGH
    subtract_shift: int = DEFAULT_SUBTRACT_SHIFT
    window: int = DEFAULT_WINDOW
    min_area: float | None = None  # None = min_area_frac of the cropped area
    min_area_frac: float = DEFAULT_MIN_AREA_FRAC
    validate: bool = True
    heuristic: HeuristicParams = field(default_factory=HeuristicParams)

    def resolved_min_area(self, cropped_area: int) -> float:
        if self.min_area is not None:
            return self.min_area
        return self.min_area_frac * cropped_area


def resolve_grid(frames: list[Frame], params: PipelineParams) -> BlockGrid:
    """Fixed g if configured, otherwise auto-select from the first two frames."""
    if not frames:
        raise SequenceTooShort("no frames to resolve a grid from")
    if params.grid is not None:
        g = params.grid
    else:
        if len(frames) < 2:
            raise SequenceTooShort("grid auto-selection needs at least 2 frames")
        g = select_grid(frames[0], frames[1], params.grid_low, params.grid_high)
    return make_grid(frames[0].width, frames[0].height, g)


def detect_frame(
    model: BackgroundModel, frame: Frame, params: PipelineParams
) -> tuple[ForegroundMask, list[DetectedObject]]:
    """Mask and labeled objects for one frame against a complete model."""
    mask = make_mask(model, frame, params.subtract_shift, params.window)
    cropped_area = mask.width * mask.height
    objects = connected_components(mask, params.resolved_min_area(cropped_area))
    if params.validate:
        if objects:
            masked = apply_mask(frame, mask)
            objects = classify_all(objects, masked, params.heuristic)
    else:
        objects = [replace(o, label=VEHICLE, score=1.0) for o in objects]
    return mask, objects


def run_detection(
    model: BackgroundModel,
    frames: list[Frame],
    params: PipelineParams,
    jobs: int = 1,
) -> list[tuple[ForegroundMask, list[DetectedObject]]]:
    """detect_frame over a sequence; output order always matches input."""
    if jobs <= 1 or len(frames) < 2:
        return [detect_frame(model, f, params) for f in frames]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(lambda f: detect_frame(model, f, params), frames))
