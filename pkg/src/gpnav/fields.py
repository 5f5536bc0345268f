"""Occupancy grids, exact Euclidean distance transforms and composite fields.

Arrays are indexed ``[iy, ix]`` (row = y, column = x).  World coordinates of a
cell center are ``origin + (ix, iy) * cell_size``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import ndimage


@dataclass(frozen=True)
class GridGeometry:
    origin: tuple[float, float]
    cell_size: float
    width: int
    height: int

    def __post_init__(self):
        if not self.cell_size > 0:
            raise ValueError("cell_size must be positive")
        if self.width < 1 or self.height < 1:
            raise ValueError("grid must have at least one cell")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @property
    def diagonal(self) -> float:
        return self.cell_size * math.hypot(self.width, self.height)

    def world_to_cell(self, p) -> tuple[int, int]:
        """Nearest cell ``(ix, iy)``; may lie outside the grid."""
        ix = int(math.floor((p[0] - self.origin[0]) / self.cell_size + 0.5))
        iy = int(math.floor((p[1] - self.origin[1]) / self.cell_size + 0.5))
        return ix, iy

    def cell_to_world(self, ix, iy) -> np.ndarray:
        return np.array([self.origin[0] + ix * self.cell_size,
                         self.origin[1] + iy * self.cell_size])

    def contains_cell(self, ix, iy) -> bool:
        return 0 <= ix < self.width and 0 <= iy < self.height

    def contains(self, p) -> bool:
        return self.contains_cell(*self.world_to_cell(p))

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """World ``(X, Y)`` meshes of all cell centers, each of ``shape``."""
        xs = self.origin[0] + self.cell_size * np.arange(self.width)
        ys = self.origin[1] + self.cell_size * np.arange(self.height)
        return np.meshgrid(xs, ys)


@dataclass(frozen=True)
class OccupancyGrid:
    geometry: GridGeometry
    cells: np.ndarray

    def __post_init__(self):
        cells = np.asarray(self.cells, dtype=bool)
        if cells.shape != self.geometry.shape:
            raise ValueError(
                f"cells shape {cells.shape} does not match geometry {self.geometry.shape}")
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)

    @classmethod
    def empty(cls, geometry: GridGeometry) -> "OccupancyGrid":
        return cls(geometry, np.zeros(geometry.shape, dtype=bool))

    def with_discs(self, centers, radius: float) -> "OccupancyGrid":
        """Copy with discs rasterized at their nearest cells (see ``rasterize_disc``)."""
        cells = self.cells.copy()
        for c in centers:
            cells |= rasterize_disc(self.geometry, c, radius)
        return OccupancyGrid(self.geometry, cells)


@dataclass(frozen=True)
class DistanceField:
    geometry: GridGeometry
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.geometry.shape:
            raise ValueError("values shape does not match geometry")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class PrimitiveField:
    """Distance field of a disc, over a square window centered on the disc."""

    radius: float
    cell_size: float
    half: int  # window is (2*half + 1) cells on a side
    values: np.ndarray = field(repr=False)

    @property
    def reach(self) -> float:
        """Distance from the disc edge that the window is guaranteed to cover."""
        return self.half * self.cell_size - self.radius


# ---------------------------------------------------------------------------
# distance transforms

def _finish(geometry: GridGeometry, sq_cells: np.ndarray) -> DistanceField:
    # shared by both transforms so that equal integer distances give equal floats
    values = np.sqrt(sq_cells.astype(float)) * geometry.cell_size
    return DistanceField(geometry, np.minimum(values, geometry.diagonal))


def compute_edt(grid: OccupancyGrid) -> DistanceField:
    """Exact unsigned EDT (meters) from each cell center to the nearest occupied center.

    An all-free grid saturates at the grid diagonal length.
    """
    geom = grid.geometry
    occ = grid.cells
    if not occ.any():
        return DistanceField(geom, np.full(geom.shape, geom.diagonal))
    iy, ix = ndimage.distance_transform_edt(~occ, return_distances=False,
                                            return_indices=True)
    rows, cols = np.indices(geom.shape)
    sq = (iy - rows) ** 2 + (ix - cols) ** 2
    return _finish(geom, sq)


def brute_force_edt(grid: OccupancyGrid) -> DistanceField:
    """O(cells^2) reference transform, for testing ``compute_edt``."""
    geom = grid.geometry
    occ_iy, occ_ix = np.nonzero(grid.cells)
    if occ_iy.size == 0:
        return DistanceField(geom, np.full(geom.shape, geom.diagonal))
    rows, cols = np.indices(geom.shape)
    best = np.full(geom.shape, np.iinfo(np.int64).max, dtype=np.int64)
    for oy, ox in zip(occ_iy.tolist(), occ_ix.tolist()):
        np.minimum(best, (rows - oy) ** 2 + (cols - ox) ** 2, out=best)
    return _finish(geom, best)


# ---------------------------------------------------------------------------
# primitives and composition

def rasterize_disc(geometry: GridGeometry, center, radius: float) -> np.ndarray:
    """Boolean mask of cells whose centers lie within ``radius`` of the disc center.

    The disc center is snapped to its nearest cell first, the same alignment
    ``composite_min`` uses for overlays.  The snapped cell is always included.
    """
    cx, cy = geometry.world_to_cell(center)
    r_cells = radius / geometry.cell_size
    k = int(math.floor(r_cells + 1e-9))
    mask = np.zeros(geometry.shape, dtype=bool)
    x0, x1 = max(cx - k, 0), min(cx + k + 1, geometry.width)
    y0, y1 = max(cy - k, 0), min(cy + k + 1, geometry.height)
    if x0 >= x1 or y0 >= y1:
        return mask
    rows, cols = np.ogrid[y0:y1, x0:x1]
    mask[y0:y1, x0:x1] = (cols - cx) ** 2 + (rows - cy) ** 2 <= r_cells ** 2 + 1e-9
    return mask


def disc_field(radius: float, cell_size: float, reach: float = 0.8) -> PrimitiveField:
    """Precompute the distance field of a disc of ``radius`` meters.

    The window side is ``2 * (radius + reach + 2 * cell_size)`` so that the
    field is correct out to ``reach`` beyond the disc edge.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    half = int(math.ceil((radius + reach + 2 * cell_size) / cell_size - 1e-9))
    side = 2 * half + 1
    geom = GridGeometry((-half * cell_size, -half * cell_size), cell_size, side, side)
    occ = OccupancyGrid(geom, rasterize_disc(geom, (0.0, 0.0), radius))
    return PrimitiveField(radius, cell_size, half, compute_edt(occ).values)


def _overlay_slices(geometry: GridGeometry, prim: PrimitiveField, position):
    cx, cy = geometry.world_to_cell(position)
    h = prim.half
    x0, x1 = max(cx - h, 0), min(cx + h + 1, geometry.width)
    y0, y1 = max(cy - h, 0), min(cy + h + 1, geometry.height)
    if x0 >= x1 or y0 >= y1:
        return None
    dst = (slice(y0, y1), slice(x0, x1))
    src = (slice(y0 - (cy - h), y1 - (cy - h)), slice(x0 - (cx - h), x1 - (cx - h)))
    return dst, src


def composite_min(env: DistanceField,
                  overlays: Sequence[tuple[PrimitiveField, Sequence[float]]]) -> DistanceField:
    """Pointwise min of ``env`` and primitive fields placed at world positions.

    Overlay centers snap to the nearest cell; windows are clipped at the grid
    border, and cells outside every window keep their ``env`` value.
    """
    out = np.array(env.values, copy=True)
    for prim, pos in overlays:
        if not math.isclose(prim.cell_size, env.geometry.cell_size):
            raise ValueError("primitive cell size differs from the field's")
        sl = _overlay_slices(env.geometry, prim, pos)
        if sl is None:
            continue
        dst, src = sl
        np.minimum(out[dst], prim.values[src], out=out[dst])
    return DistanceField(env.geometry, out)


@dataclass(frozen=True)
class CompositeSequence:
    fields: tuple[DistanceField, ...]
    dt: float
    t0: float = 0.0

    def __post_init__(self):
        if any(f.geometry != self.fields[0].geometry for f in self.fields[1:]):
            raise ValueError("all fields of a sequence must share one geometry")

    def __len__(self):
        return len(self.fields)

    def __getitem__(self, i) -> DistanceField:
        return self.fields[i]

    def at_index(self, i: int) -> DistanceField:
        """Field for support index ``i``; indices past the end reuse the last field."""
        return self.fields[min(max(i, 0), len(self.fields) - 1)]


def build_composite_sequence(env: DistanceField, predictions, primitive: PrimitiveField,
                             n: int, dt: float, t0: float = 0.0) -> CompositeSequence:
    """Composite fields for ``n`` time steps.

    ``predictions`` holds one sequence of predicted positions per obstacle.
    Short sequences are padded with their final position; extra entries are
    ignored.
    """
    padded = []
    for traj in predictions:
        traj = [tuple(p) for p in traj]
        if not traj:
            continue
        padded.append(traj[:n] + [traj[-1]] * max(0, n - len(traj)))
    fields = tuple(composite_min(env, [(primitive, traj[i]) for traj in padded])
                   for i in range(n))
    return CompositeSequence(fields, dt, t0)


# ---------------------------------------------------------------------------
# sampling

def sample_field(f: DistanceField, p) -> tuple[float, np.ndarray, bool]:
    """Bilinear value and gradient of ``f`` at world point ``p``.

    Returns ``(distance, gradient, out_of_bounds)``.  Points outside the grid
    extent are clamped to the nearest interior point and flagged.  The
    gradient is that of the bilinear interpolant, which is discontinuous
    across cell-center lines.
    """
    g = f.geometry
    s = g.cell_size
    u = (p[0] - g.origin[0]) / s
    v = (p[1] - g.origin[1]) / s
    oob = not (-0.5 <= u <= g.width - 0.5 and -0.5 <= v <= g.height - 0.5)
    u = min(max(u, 0.0), g.width - 1.0)
    v = min(max(v, 0.0), g.height - 1.0)
    i0 = min(int(math.floor(u)), max(g.width - 2, 0))
    j0 = min(int(math.floor(v)), max(g.height - 2, 0))
    i1 = min(i0 + 1, g.width - 1)
    j1 = min(j0 + 1, g.height - 1)
    a = u - i0
    b = v - j0
    vals = f.values
    f00, f10 = vals[j0, i0], vals[j0, i1]
    f01, f11 = vals[j1, i0], vals[j1, i1]
    d = (1 - a) * (1 - b) * f00 + a * (1 - b) * f10 + (1 - a) * b * f01 + a * b * f11
    grad = np.zeros(2)
    if not oob:
        if i1 != i0:
            grad[0] = ((1 - b) * (f10 - f00) + b * (f11 - f01)) / s
        if j1 != j0:
            grad[1] = ((1 - a) * (f01 - f00) + a * (f11 - f10)) / s
    return float(d), grad, oob


# ---------------------------------------------------------------------------
# file formats

def load_map(path) -> OccupancyGrid:
    """Read ``width height cell_size origin_x origin_y`` then rows of 0/1.

    The first text row is the top of the map (largest y).
    """
    lines = [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty map file")
    head = lines[0].split()
    if len(head) != 5:
        raise ValueError(f"{path}: header must be 'width height cell_size origin_x origin_y'")
    w, h = int(head[0]), int(head[1])
    geom = GridGeometry((float(head[3]), float(head[4])), float(head[2]), w, h)
    rows = lines[1:]
    if len(rows) != h or any(len(r) != w or set(r) - {"0", "1"} for r in rows):
        raise ValueError(f"{path}: expected {h} rows of {w} '0'/'1' characters")
    cells = np.array([[c == "1" for c in r] for r in rows[::-1]], dtype=bool)
    return OccupancyGrid(geom, cells)


def save_map(grid: OccupancyGrid, path) -> None:
    g = grid.geometry
    lines = [f"{g.width} {g.height} {g.cell_size:g} {g.origin[0]:g} {g.origin[1]:g}"]
    for row in grid.cells[::-1]:
        lines.append("".join("1" if c else "0" for c in row))
    Path(path).write_text("\n".join(lines) + "\n")


def export_field_csv(f: DistanceField, path) -> None:
    """Row-major values (row 0 = lowest y), six decimals."""
    np.savetxt(path, f.values, fmt="%.6f", delimiter=",")
