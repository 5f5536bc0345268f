"""Synthetic track corpora for prediction benchmarks."""
from __future__ import annotations

import numpy as np

from ..fields import GridGeometry, OccupancyGrid, compute_edt
from ..intent import GoalSet, TrackHistory
from .humans import ScriptedHuman


def cv_tracks(n_tracks: int = 10, duration: float = 12.0, dt: float = 0.4,
              seed: int = 0) -> list[TrackHistory]:
    """Straight constant-velocity tracks with random start, heading and speed."""
    rng = np.random.default_rng(seed)
    t = np.arange(int(round(duration / dt)) + 1) * dt
    out = []
    for _ in range(n_tracks):
        p0 = rng.uniform(-5.0, 5.0, 2)
        th = rng.uniform(-np.pi, np.pi)
        v = rng.uniform(0.8, 1.5) * np.array([np.cos(th), np.sin(th)])
        out.append(TrackHistory(t.copy(), p0 + t[:, None] * v))
    return out


def walled_room(width: float, height: float, cell_size: float = 0.1,
                discs=()) -> OccupancyGrid:
    """Rectangle with one-cell border walls and optional ``(x, y, r)`` disc obstacles."""
    geom = GridGeometry((0.5 * cell_size, 0.5 * cell_size), cell_size,
                        int(round(width / cell_size)), int(round(height / cell_size)))
    cells = np.zeros(geom.shape, dtype=bool)
    cells[0, :] = cells[-1, :] = cells[:, 0] = cells[:, -1] = True
    grid = OccupancyGrid(geom, cells)
    for x, y, r in discs:
        grid = grid.with_discs([(x, y)], r)
    return grid


def curved_corpus(n_tracks: int = 20, dt: float = 0.4, seed: int = 0,
                  dwell: float = 8.0) -> tuple[OccupancyGrid, GoalSet, list[TrackHistory]]:
    """Walkers crossing a room around a central disc toward one of four goals.

    Each walker starts near one wall and heads for the goal on the opposite
    side, so its path bends around the obstacle; it then stands at the goal
    for ``dwell`` seconds.  Returns the map, the goal set and the tracks.
    """
    rng = np.random.default_rng(seed)
    grid = walled_room(12.0, 12.0, discs=[(6.0, 6.0, 1.5)])
    env = compute_edt(grid)
    goals = np.array([[1.2, 6.0], [10.8, 6.0], [6.0, 1.2], [6.0, 10.8]])
    tracks = []
    for i in range(n_tracks):
        g = i % 4
        opposite = goals[[1, 0, 3, 2][g]]
        axis = 1 if g < 2 else 0  # lateral axis of the start point
        start = opposite.copy()
        start[axis] += rng.uniform(-1.2, 1.2)
        speed = rng.uniform(0.9, 1.4)
        walker = ScriptedHuman.from_waypoints(f"w{i}", env, start, [(*goals[g], dwell)],
                                              speed, radius=0.3)
        t = np.arange(0.0, walker.finish_time + 1e-9, dt)
        tracks.append(TrackHistory(t, np.array([walker.position_at(s) for s in t])))
    return grid, GoalSet(goals, np.full(4, 10.0)), tracks
