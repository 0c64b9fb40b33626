"""Spatial discretization shared by social pooling and target fusion.

The interaction area is a fixed 60.96 x 10.67 m box (200 x 35 ft) split
into 25 longitudinal rows and 5 lateral columns.  The same geometry is
used twice: centered on a predicted target (neighbor pooling) and
centered on the controlled vehicle (target fusion).  Cells are half-open
on the upper boundary so the partition is exact; anything on or past the
upper edge is out of area.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation


@dataclass(frozen=True)
class GridSpec:
    length: float = 60.96  # longitudinal span [m], row axis
    width: float = 10.67   # lateral span [m], column axis
    rows: int = 25
    cols: int = 5

    @property
    def cell_length(self) -> float:
        return self.length / self.rows

    @property
    def cell_width(self) -> float:
        return self.width / self.cols

    @property
    def center_cell(self) -> tuple[int, int]:
        # (12, 2) for the default 25x5 grid; holds the reference vehicle.
        return (self.rows // 2, self.cols // 2)

    def as_dict(self) -> dict:
        return {"length": self.length, "width": self.width,
                "rows": self.rows, "cols": self.cols}


def cell_index(offset: tuple[float, float], spec: GridSpec = GridSpec()) -> tuple[int, int] | None:
    """Map a (dx, dy) offset from the grid center to a (row, col) cell.

    Returns None when the offset falls outside the area.  Lower edges are
    included, upper edges excluded.
    """
    dx, dy = float(offset[0]), float(offset[1])
    row = math.floor((dx + spec.length / 2.0) / spec.cell_length)
    col = math.floor((dy + spec.width / 2.0) / spec.cell_width)
    if 0 <= row < spec.rows and 0 <= col < spec.cols:
        return (row, col)
    return None


@dataclass
class GridTensor:
    """Dense cell values plus an occupancy mask.

    The mask lets consumers tell an absent vehicle apart from a vehicle
    whose encoding happens to be zero.  Unoccupied cells are exactly zero.
    """

    values: np.ndarray           # (rows, cols, channels)
    occupancy: np.ndarray = field(default=None)  # (rows, cols) bool

    def __post_init__(self):
        if self.occupancy is None:
            self.occupancy = np.zeros(self.values.shape[:2], dtype=bool)

    @property
    def channels(self) -> int:
        return self.values.shape[2]


def scatter(entries: list[tuple[tuple[int, int], np.ndarray]],
            spec: GridSpec = GridSpec(),
            channels: int | None = None) -> GridTensor:
    """Place per-vehicle vectors into their grid cells.

    Callers must have resolved cell ties already; a duplicate cell here is
    a contract violation, not a tie to break silently.
    """
    if channels is None:
        if not entries:
            raise ContractViolation("scatter with no entries needs an explicit channel count")
        channels = len(np.asarray(entries[0][1]).ravel())
    values = np.zeros((spec.rows, spec.cols, channels), dtype=float)
    occupancy = np.zeros((spec.rows, spec.cols), dtype=bool)
    for cell, vec in entries:
        r, c = cell
        if not (0 <= r < spec.rows and 0 <= c < spec.cols):
            raise ContractViolation(f"cell {cell} outside {spec.rows}x{spec.cols} grid")
        if occupancy[r, c]:
            raise ContractViolation(f"duplicate entry for cell {cell}")
        values[r, c] = np.asarray(vec, dtype=float)
        occupancy[r, c] = True
    return GridTensor(values=values, occupancy=occupancy)


def gather(tensor: GridTensor, cell: tuple[int, int]) -> np.ndarray:
    """Slice the channel vector out of one cell."""
    r, c = cell
    rows, cols = tensor.values.shape[:2]
    if not (0 <= r < rows and 0 <= c < cols):
        raise IndexError(f"cell {cell} outside {rows}x{cols} grid")
    return tensor.values[r, c]
