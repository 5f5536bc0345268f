"""Timing of composite field sequences against full per-step EDT recomputation."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..fields import (GridGeometry, OccupancyGrid, build_composite_sequence, compute_edt,
                      disc_field)


@dataclass
class BenchReport:
    sizes: list
    n: int
    obstacles: int
    repetitions: int
    full_ms: list = field(default_factory=list)  # median per size
    composite_ms: list = field(default_factory=list)
    rep_ratios: list = field(default_factory=list)  # per size, ratio of every repetition

    @property
    def ratio(self) -> list:
        return [f / c for f, c in zip(self.full_ms, self.composite_ms)]

    def to_csv(self) -> str:
        lines = ["size,full_ms,composite_ms,ratio"]
        for s, f, c, r in zip(self.sizes, self.full_ms, self.composite_ms, self.ratio):
            lines.append(f"{s},{f:.4f},{c:.4f},{r:.4f}")
        return "\n".join(lines) + "\n"


@dataclass
class BenchWorkload:
    """Inputs of one benchmark size: the static map and per-step obstacle centers."""

    env: OccupancyGrid
    positions: np.ndarray  # (n, obstacles, 2)
    radius: float

    def to_csv(self) -> str:
        lines = ["step,obstacle,x,y"]
        for j, row in enumerate(self.positions):
            for k, (x, y) in enumerate(row):
                lines.append(f"{j},{k},{x:.6f},{y:.6f}")
        return "\n".join(lines) + "\n"


def make_workload(size: int, n: int, obstacles: int, seed: int = 0, cell_size: float = 0.1,
                  radius: float = 0.3) -> BenchWorkload:
    """Square map with border walls and a few static blocks; discs walk straight lines."""
    rng = np.random.default_rng(seed)
    geom = GridGeometry((0.0, 0.0), cell_size, size, size)
    cells = np.zeros(geom.shape, dtype=bool)
    cells[0, :] = cells[-1, :] = cells[:, 0] = cells[:, -1] = True
    for _ in range(3):
        x, y = rng.integers(size // 8, size - size // 4, 2)
        w, h = rng.integers(2, max(3, size // 10), 2)
        cells[y:y + h, x:x + w] = True
    extent = size * cell_size
    start = rng.uniform(0.2 * extent, 0.8 * extent, (obstacles, 2))
    heading = rng.uniform(-np.pi, np.pi, obstacles)
    vel = 0.05 * extent * np.stack([np.cos(heading), np.sin(heading)], axis=1)
    steps = np.arange(n)[:, None, None] * 0.5
    positions = np.clip(start[None] + steps * vel[None], 0.0, extent)
    return BenchWorkload(OccupancyGrid(geom, cells), positions, radius)


def _time_full(work: BenchWorkload) -> float:
    t0 = time.perf_counter()
    for row in work.positions:
        grid = work.env
        for p in row:
            grid = grid.with_discs([p], work.radius)
        compute_edt(grid)
    return time.perf_counter() - t0


def _time_composite(work: BenchWorkload, prim) -> float:
    t0 = time.perf_counter()
    env = compute_edt(work.env)
    build_composite_sequence(env, list(work.positions.transpose(1, 0, 2)), prim,
                             len(work.positions), 0.5)
    return time.perf_counter() - t0


def bench_composite(sizes=(64, 128, 256), n: int = 20, obstacles: int = 2,
                    repetitions: int = 5, seed: int = 0, reach: float = 0.8) -> BenchReport:
    """Median wall time of ``n`` full EDTs versus one EDT plus ``n`` composite passes.

    The disc primitive is computed once before timing; it is reused for every
    sequence in an application.
    """
    if n < 1 or repetitions < 1 or obstacles < 0:
        raise ValueError("n and repetitions must be positive")
    report = BenchReport(list(sizes), n, obstacles, repetitions)
    for size in sizes:
        if size < 4:
            raise ValueError("grid size must be at least 4")
        work = make_workload(size, n, obstacles, seed)
        prim = disc_field(work.radius, work.env.geometry.cell_size, reach)
        _time_full(work), _time_composite(work, prim)  # warm-up
        full, comp = [], []
        for _ in range(repetitions):
            full.append(_time_full(work))
            comp.append(_time_composite(work, prim))
        report.full_ms.append(1e3 * float(np.median(full)))
        report.composite_ms.append(1e3 * float(np.median(comp)))
        report.rep_ratios.append([f / c for f, c in zip(full, comp)])
    return report
