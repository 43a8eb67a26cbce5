"""Static reference background image (SRBI) construction.

The model is assembled block by block: counterpart blocks of adjacent
frames are compared, and when a cell is judged static its pixels are
committed verbatim from the later frame of the pair. Cells are visited in
row-major order and each cell settles at most once; building stops when
every cell has settled or the frame budget runs out.

Cell status bookkeeping: a cell is either unsettled, settled at a frame
index (the later frame of the agreeing pair), or backfilled from a
fallback frame after the budget ran out.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .blocks import BlockGrid, extract_block, make_grid
from .comparators import ComparatorConfig, Verdict, compare
from .errors import InconsistentSequence, PnmError, SequenceTooShort
from .imaging import Frame, load_frame, save_frame

CELL_UNSETTLED = -1
CELL_BACKFILLED = -2

DEFAULT_MAX_FRAMES = 150

_SIDECAR_SUFFIX = ".cells"


@dataclass
class BackgroundModel:
    """SRBI pixels over the cropped extent plus per-cell provenance.

    ``cell_status[row, col]`` is the settle frame index (>= 0),
    CELL_UNSETTLED, or CELL_BACKFILLED. ``built_from`` is the half-open
    range of stream indices consumed while building.
    """

    grid: BlockGrid
    pixels: np.ndarray  # (cropped_height, cropped_width) uint8, read-only
    cell_status: np.ndarray  # (g, g) int32
    built_from: tuple[int, int]

    def block(self, row: int, col: int) -> np.ndarray:
        y0 = row * self.grid.block_height
        x0 = col * self.grid.block_width
        return self.pixels[
            y0 : y0 + self.grid.block_height, x0 : x0 + self.grid.block_width
        ]


def coverage(model: BackgroundModel) -> float:
    """Fraction of cells that are settled or backfilled."""
    return float(np.mean(model.cell_status != CELL_UNSETTLED))


def _check_frames(frames: list[Frame], grid: BlockGrid) -> None:
    if len(frames) < 2:
        raise SequenceTooShort(f"need at least 2 frames to build, got {len(frames)}")
    w, h = frames[0].width, frames[0].height
    if w < grid.cropped_width or h < grid.cropped_height:
        raise InconsistentSequence(
            0, f"frame 0 is {w}x{h}, smaller than the grid extent"
        )
    for i, f in enumerate(frames[1:], start=1):
        if (f.width, f.height) != (w, h):
            raise InconsistentSequence(
                i, f"frame {i} is {f.width}x{f.height}, expected {w}x{h}"
            )


def _compare_cells(cells, a, b, grid, cfg, jobs):
    """Verdicts for the given cells between frames a and b, in cell order."""

    def one(cell):
        row, col = cell
        return compare(
            extract_block(a, grid, row, col), extract_block(b, grid, row, col), cfg
        ).verdict

    if jobs <= 1 or len(cells) < 2:
        return [one(c) for c in cells]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(one, cells))


def build_srbi(
    frames,
    grid: BlockGrid,
    cfg: ComparatorConfig,
    max_frames: int = DEFAULT_MAX_FRAMES,
    jobs: int = 1,
) -> BackgroundModel:
    """Build the SRBI from a frame sequence.

    Consumes at most ``max_frames`` frames. A partial model (coverage < 1)
    is a normal return, not an error; see ``backfill``.
    """
    frames = list(frames)
    _check_frames(frames, grid)
    if max_frames < 2:
        raise ValueError(f"max_frames must be >= 2, got {max_frames}")
    g = grid.g
    status = np.full((g, g), CELL_UNSETTLED, dtype=np.int32)
    pixels = np.zeros((grid.cropped_height, grid.cropped_width), dtype=np.uint8)
    limit = min(len(frames), max_frames)
    consumed = 2  # a single comparison already looks at two frames
    for t in range(limit - 1):
        pending = [
            (r, c) for r in range(g) for c in range(g) if status[r, c] == CELL_UNSETTLED
        ]
        if not pending:
            consumed = t + 1
            break
        consumed = t + 2
        a, b = frames[t], frames[t + 1]
        verdicts = _compare_cells(pending, a, b, grid, cfg, jobs)
        for (row, col), verdict in zip(pending, verdicts):
            if verdict is Verdict.STATIC:
                y0 = row * grid.block_height
                x0 = col * grid.block_width
                pixels[
                    y0 : y0 + grid.block_height, x0 : x0 + grid.block_width
                ] = extract_block(b, grid, row, col)
                status[row, col] = t + 1
    pixels.setflags(write=False)
    return BackgroundModel(
        grid=grid, pixels=pixels, cell_status=status, built_from=(0, consumed)
    )


def backfill(model: BackgroundModel, fallback: Frame) -> BackgroundModel:
    """Fill unsettled cells from ``fallback``, marking them CELL_BACKFILLED.

    Returns a new model; settled cells and their provenance are untouched.
    """
    grid = model.grid
    if fallback.width < grid.cropped_width or fallback.height < grid.cropped_height:
        raise InconsistentSequence(
            0,
            f"fallback frame is {fallback.width}x{fallback.height}, "
            "smaller than the grid extent",
        )
    pixels = model.pixels.copy()
    status = model.cell_status.copy()
    for row in range(grid.g):
        for col in range(grid.g):
            if status[row, col] == CELL_UNSETTLED:
                y0 = row * grid.block_height
                x0 = col * grid.block_width
                pixels[
                    y0 : y0 + grid.block_height, x0 : x0 + grid.block_width
                ] = extract_block(fallback, grid, row, col)
                status[row, col] = CELL_BACKFILLED
    pixels.setflags(write=False)
    return BackgroundModel(
        grid=grid, pixels=pixels, cell_status=status, built_from=model.built_from
    )


def update_srbi(
    model: BackgroundModel,
    frames,
    cfg: ComparatorConfig,
    max_frames: int = DEFAULT_MAX_FRAMES,
    jobs: int = 1,
) -> BackgroundModel:
    """Rebuild from newer frames; keep the old model unless coverage holds up.

    The new model is adopted only when its coverage is at least the old
    one's, so a burst of activity can never degrade an established model.
    """
    fresh = build_srbi(frames, model.grid, cfg, max_frames=max_frames, jobs=jobs)
    if coverage(fresh) >= coverage(model):
        return fresh
    return model


_STATUS_NAMES = {CELL_UNSETTLED: "unsettled", CELL_BACKFILLED: "backfilled"}


def save_model(model: BackgroundModel, path) -> None:
    """Write the SRBI as PGM plus a '.cells' text sidecar.

    Sidecar lines are ``row col status settle_index`` per cell, row-major;
    settle_index is -1 unless the cell settled from a frame pair.
    """
    path = Path(path)
    save_frame(Frame(model.pixels), path)
    lines = [
        "# srbi cells v1",
        f"# grid {model.grid.g}",
        f"# built_from {model.built_from[0]} {model.built_from[1]}",
    ]
    for row in range(model.grid.g):
        for col in range(model.grid.g):
            s = int(model.cell_status[row, col])
            name = _STATUS_NAMES.get(s, "settled")
            settle = s if s >= 0 else -1
            lines.append(f"{row} {col} {name} {settle}")
    path.with_name(path.name + _SIDECAR_SUFFIX).write_text(
        "\n".join(lines) + "\n", encoding="ascii"
    )


def load_model(path) -> BackgroundModel:
    """Load a model written by save_model (PGM + '.cells' sidecar)."""
    path = Path(path)
    frame = load_frame(path)
    sidecar = path.with_name(path.name + _SIDECAR_SUFFIX)
    if not sidecar.exists():
        raise PnmError(f"model sidecar missing: {sidecar}")
    g = None
    built = (0, 0)
    cells = {}
    for line in sidecar.read_text(encoding="ascii").splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if parts[:1] == ["grid"]:
                g = int(parts[1])
            elif parts[:1] == ["built_from"]:
                built = (int(parts[1]), int(parts[2]))
            continue
        row_s, col_s, name, settle_s = line.split()
        cells[(int(row_s), int(col_s))] = (name, int(settle_s))
    if g is None:
        raise PnmError(f"model sidecar lacks a grid declaration: {sidecar}")
    grid = make_grid(frame.width, frame.height, g)
    if (grid.cropped_width, grid.cropped_height) != (frame.width, frame.height):
        raise PnmError("model image dimensions are not a multiple of the grid")
    status = np.full((g, g), CELL_UNSETTLED, dtype=np.int32)
    for row in range(g):
        for col in range(g):
            if (row, col) not in cells:
                raise PnmError(f"model sidecar missing cell ({row}, {col})")
            name, settle = cells[(row, col)]
            if name == "settled":
                status[row, col] = settle
            elif name == "backfilled":
                status[row, col] = CELL_BACKFILLED
            elif name == "unsettled":
                status[row, col] = CELL_UNSETTLED
            else:
                raise PnmError(f"model sidecar has unknown cell status {name!r}")
    px = frame.pixels.copy()
    px.setflags(write=False)
    return BackgroundModel(grid=grid, pixels=px, cell_status=status, built_from=built)
