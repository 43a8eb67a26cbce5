"""Foreground extraction: subtraction, mask cleanup, objects.

Subtraction marks every pixel whose quantized intensity bucket differs
between the model and the frame. The raw change map is denoised with a
binary median (strict-majority) filter, then 8-connected components
become detected objects.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .background import CELL_UNSETTLED, BackgroundModel
from .errors import ModelIncomplete, PnmError, ShapeMismatch
from .imaging import Frame

DEFAULT_SUBTRACT_SHIFT = 6
DEFAULT_WINDOW = 3
DEFAULT_MIN_AREA_FRAC = 0.001


@dataclass(frozen=True, eq=False)
class ForegroundMask:
    """Binary change map over the model's cropped extent (uint8 0/1)."""

    bits: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.bits)
        if arr.ndim != 2:
            raise ValueError("mask bits must be a 2-D array")
        if arr.dtype != np.uint8:
            arr = arr.astype(np.uint8)
        else:
            arr = arr.copy()
        if arr.size and arr.max() > 1:
            raise ValueError("mask bits must be 0 or 1")
        arr.setflags(write=False)
        object.__setattr__(self, "bits", arr)

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    def __eq__(self, other):
        if not isinstance(other, ForegroundMask):
            return NotImplemented
        return np.array_equal(self.bits, other.bits)


def subtract(model: BackgroundModel, frame: Frame, shift: int = DEFAULT_SUBTRACT_SHIFT) -> np.ndarray:
    """Raw per-pixel change map over the cropped extent.

    change[p] = 1 iff (model[p] >> shift) XOR (frame[p] >> shift) != 0.
    The model must be fully covered (settled or backfilled everywhere).
    """
    if not 0 <= shift <= 7:
        raise ValueError(f"subtract shift must be in [0, 7], got {shift}")
    if (model.cell_status == CELL_UNSETTLED).any():
        raise ModelIncomplete(
            "model has unsettled cells; backfill before subtracting"
        )
    ch, cw = model.pixels.shape
    if frame.height < ch or frame.width < cw:
        raise ShapeMismatch(
            f"frame {frame.width}x{frame.height} smaller than model extent {cw}x{ch}"
        )
    window = frame.pixels[:ch, :cw]
    changed = (model.pixels >> shift) ^ (window >> shift)
    return (changed != 0).astype(np.uint8)


def median_filter_mask(bits: np.ndarray, window: int = DEFAULT_WINDOW) -> np.ndarray:
    """Binary median: keep a pixel iff strictly more than half its window
    (clipped to bounds) is set. Even splits resolve to 0.
    """
    if window < 3 or window % 2 == 0:
        raise ValueError(f"window must be odd and >= 3, got {window}")
    bits = np.asarray(bits)
    if bits.ndim != 2 or bits.size == 0:
        raise ValueError("mask bits must be a non-empty 2-D array")
    h, w = bits.shape
    r = window // 2
    # summed-area table: P[y, x] = sum of bits[:y, :x]
    p = np.zeros((h + 1, w + 1), dtype=np.int64)
    np.cumsum(np.cumsum(bits, axis=0), axis=1, out=p[1:, 1:])
    ys = np.arange(h)
    xs = np.arange(w)
    y0 = np.maximum(ys - r, 0)
    y1 = np.minimum(ys + r, h - 1) + 1
    x0 = np.maximum(xs - r, 0)
    x1 = np.minimum(xs + r, w - 1) + 1
    ones = (
        p[np.ix_(y1, x1)] - p[np.ix_(y0, x1)] - p[np.ix_(y1, x0)] + p[np.ix_(y0, x0)]
    )
    in_bounds = (y1 - y0)[:, None] * (x1 - x0)[None, :]
    return (2 * ones > in_bounds).astype(np.uint8)


def make_mask(
    model: BackgroundModel,
    frame: Frame,
    shift: int = DEFAULT_SUBTRACT_SHIFT,
    window: int = DEFAULT_WINDOW,
) -> ForegroundMask:
    """subtract + median cleanup in one step."""
    return ForegroundMask(median_filter_mask(subtract(model, frame, shift), window))


def apply_mask(frame: Frame, mask: ForegroundMask) -> Frame:
    """Keep frame pixels where the mask is set, zero elsewhere.

    The output has the mask's (cropped) dimensions; the frame must cover it.
    """
    if frame.height < mask.height or frame.width < mask.width:
        raise ShapeMismatch(
            f"frame {frame.width}x{frame.height} smaller than mask "
            f"{mask.width}x{mask.height}"
        )
    window = frame.pixels[: mask.height, : mask.width]
    return Frame(window * mask.bits)


@dataclass(frozen=True)
class DetectedObject:
    """One connected foreground component.

    Bbox (x, y, w, h) in cropped-frame coordinates; centroid is the mean
    of member pixel coordinates. ``label``/``score`` are filled in by the
    validation stage.
    """

    x: int
    y: int
    w: int
    h: int
    area: int
    centroid_x: float
    centroid_y: float
    label: str | None = None
    score: float = 0.0

    @property
    def bbox(self) -> tuple[int, int, int, int]:
        return (self.x, self.y, self.w, self.h)


_NEIGHBORS = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))


def connected_components(mask: ForegroundMask, min_area: float = 0.0) -> list[DetectedObject]:
    """8-connected components with at least ``min_area`` pixels.

    Objects come back sorted by (bbox.y, bbox.x); ties keep discovery order.
    """
    if min_area < 0:
        raise ValueError(f"min_area must be >= 0, got {min_area}")
    bits = mask.bits
    h, w = bits.shape
    seen = np.zeros((h, w), dtype=bool)
    objects = []
    for sy, sx in np.argwhere(bits == 1):
        if seen[sy, sx]:
            continue
        stack = [(int(sy), int(sx))]
        seen[sy, sx] = True
        area = 0
        min_x = min_y = 1 << 30
        max_x = max_y = -1
        sum_x = sum_y = 0
        while stack:
            y, x = stack.pop()
            area += 1
            sum_x += x
            sum_y += y
            min_x = min(min_x, x)
            max_x = max(max_x, x)
            min_y = min(min_y, y)
            max_y = max(max_y, y)
            for dy, dx in _NEIGHBORS:
                ny, nx = y + dy, x + dx
                if 0 <= ny < h and 0 <= nx < w and bits[ny, nx] and not seen[ny, nx]:
                    seen[ny, nx] = True
                    stack.append((ny, nx))
        if area >= min_area:
            objects.append(
                DetectedObject(
                    x=min_x,
                    y=min_y,
                    w=max_x - min_x + 1,
                    h=max_y - min_y + 1,
                    area=area,
                    centroid_x=sum_x / area,
                    centroid_y=sum_y / area,
                )
            )
    objects.sort(key=lambda o: (o.y, o.x))
    return objects


def mask_to_frame(mask: ForegroundMask) -> Frame:
    """Encode a mask as a PGM-ready frame: 0 -> 0, 1 -> 255."""
    return Frame(mask.bits * np.uint8(255))


def frame_to_mask(frame: Frame) -> ForegroundMask:
    """Decode a mask frame; only intensities 0 and 255 are legal."""
    px = frame.pixels
    bad = (px != 0) & (px != 255)
    if bad.any():
        y, x = np.argwhere(bad)[0]
        raise PnmError(
            f"mask frame has non-binary intensity {int(px[y, x])} at ({int(x)}, {int(y)})"
        )
    return ForegroundMask((px == 255).astype(np.uint8))
