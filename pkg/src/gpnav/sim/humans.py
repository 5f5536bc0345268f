"""Scripted human agents that walk shortest grid paths between waypoints."""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from ..fields import DistanceField, sample_field

SQRT2 = math.sqrt(2.0)


class RouteError(ValueError):
    pass


def _astar(free: np.ndarray, start, goal):
    """8-connected A* on a boolean free mask; cells are ``(iy, ix)``."""
    h, w = free.shape
    gy, gx = goal

    def heur(c):
        dy, dx = abs(c[0] - gy), abs(c[1] - gx)
        return (dx + dy) + (SQRT2 - 2) * min(dx, dy)

    best = {start: 0.0}
    parent = {start: None}
    heap = [(heur(start), 0.0, start)]
    while heap:
        _, g, c = heapq.heappop(heap)
        if c == goal:
            path = []
            while c is not None:
                path.append(c)
                c = parent[c]
            return path[::-1]
        if g > best[c]:
            continue
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                if dy == 0 and dx == 0:
                    continue
                n = (c[0] + dy, c[1] + dx)
                if not (0 <= n[0] < h and 0 <= n[1] < w) or not free[n]:
                    continue
                if dy and dx and not (free[c[0] + dy, c[1]] and free[c[0], c[1] + dx]):
                    continue  # no corner cutting
                ng = g + (SQRT2 if dy and dx else 1.0)
                if ng < best.get(n, math.inf):
                    best[n] = ng
                    parent[n] = c
                    heapq.heappush(heap, (ng + heur(n), ng, n))
    return None


def segment_clear(env: DistanceField, a, b, clearance: float) -> bool:
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    steps = max(2, int(math.ceil(np.linalg.norm(b - a) / (0.5 * env.geometry.cell_size))) + 1)
    for s in np.linspace(0.0, 1.0, steps):
        d, _, oob = sample_field(env, a + s * (b - a))
        if oob or d <= clearance:
            return False
    return True


def _shortest_polyline(env: DistanceField, start, goal, clearance: float) -> np.ndarray:
    if segment_clear(env, start, goal, clearance):
        return np.vstack([start, goal])
    geom = env.geometry
    free = env.values > clearance
    sx, sy = geom.world_to_cell(start)
    gx, gy = geom.world_to_cell(goal)
    if not (geom.contains_cell(sx, sy) and geom.contains_cell(gx, gy)):
        raise RouteError("route end point outside the map")
    if not free[sy, sx] or not free[gy, gx]:
        raise RouteError(f"route end point too close to obstacles: {start} -> {goal}")
    cells = _astar(free, (sy, sx), (gy, gx))
    if cells is None:
        raise RouteError(f"no route from {start.tolist()} to {goal.tolist()}")
    pts = [start] + [geom.cell_to_world(ix, iy) for iy, ix in cells[1:-1]] + [goal]
    # greedy line-of-sight shortcutting
    out = [pts[0]]
    i = 0
    while i < len(pts) - 1:
        j = len(pts) - 1
        while j > i + 1 and not segment_clear(env, pts[i], pts[j], clearance):
            j -= 1
        out.append(pts[j])
        i = j
    return np.array(out)


def chaikin(poly: np.ndarray, iterations: int = 3) -> np.ndarray:
    """Corner-cutting subdivision; end points are kept."""
    for _ in range(iterations):
        if len(poly) < 3:
            return poly
        a, b = poly[:-1], poly[1:]
        q = 0.75 * a + 0.25 * b
        r = 0.25 * a + 0.75 * b
        mid = np.empty((2 * len(a), 2))
        mid[0::2], mid[1::2] = q, r
        poly = np.vstack([poly[0], mid[1:-1], poly[-1]])
    return poly


def plan_route(env: DistanceField, start, goal, clearance: float,
               smoothing_pad: float = 0.3) -> np.ndarray:
    """Smoothed shortest path from ``start`` to ``goal`` keeping ``clearance``.

    The path is first planned with ``smoothing_pad`` of extra clearance, then
    its corners are rounded; if that fails to keep ``clearance`` the plain
    shortest polyline is returned.  Output vertices include both end points.
    """
    start = np.asarray(start, float)
    goal = np.asarray(goal, float)
    try:
        padded = _shortest_polyline(env, start, goal, clearance + smoothing_pad)
    except RouteError:
        return _shortest_polyline(env, start, goal, clearance)
    smooth = chaikin(padded)
    if all(segment_clear(env, a, b, clearance) for a, b in zip(smooth[:-1], smooth[1:])):
        return smooth
    return _shortest_polyline(env, start, goal, clearance)


@dataclass
class ScriptedHuman:
    """Position is a piecewise-linear function of time through keyframes."""

    name: str
    radius: float
    key_t: np.ndarray
    key_xy: np.ndarray
    t: float = 0.0
    goals_visited: list = field(default_factory=list)

    @classmethod
    def from_waypoints(cls, name, env: DistanceField, start, waypoints, speed: float,
                       radius: float, start_delay: float = 0.0, margin: float = 0.1):
        """``waypoints`` holds ``(x, y, dwell_seconds)`` triples."""
        if speed <= 0:
            raise ValueError("speed must be positive")
        ts = [0.0]
        xs = [np.asarray(start, float)]
        if start_delay > 0:
            ts.append(start_delay)
            xs.append(xs[-1])
        for wx, wy, dwell in waypoints:
            route = plan_route(env, xs[-1], (wx, wy), radius + margin)
            for p in route[1:]:
                ts.append(ts[-1] + float(np.linalg.norm(p - xs[-1])) / speed)
                xs.append(np.asarray(p, float))
            if dwell > 0:
                ts.append(ts[-1] + dwell)
                xs.append(xs[-1])
        return cls(name, radius, np.array(ts), np.array(xs))

    @classmethod
    def from_track(cls, name, t, xy, radius: float):
        t = np.asarray(t, float)
        return cls(name, radius, t - t[0], np.asarray(xy, float))

    @property
    def finish_time(self) -> float:
        return float(self.key_t[-1])

    def position_at(self, t: float) -> np.ndarray:
        return np.array([np.interp(t, self.key_t, self.key_xy[:, 0]),
                         np.interp(t, self.key_t, self.key_xy[:, 1])])

    @property
    def position(self) -> np.ndarray:
        return self.position_at(self.t)


def scripted_human_step(human: ScriptedHuman, env: DistanceField | None, dt: float) -> np.ndarray:
    """Advance ``human`` by ``dt`` seconds along its script; returns the new position.

    With ``env`` given, a position closer to an obstacle than the human's
    radius raises ``RouteError``.
    """
    human.t += dt
    p = human.position
    if env is not None:
        d, _, oob = sample_field(env, p)
        if oob or d <= human.radius:
            raise RouteError(f"{human.name} left free space at t={human.t:.2f}")
    return p
