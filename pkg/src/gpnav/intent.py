"""Goal discovery by occupancy analysis and Bayesian goal recognition.

Headings come from consecutive track positions; the likelihood of each goal
is a softmax over the negated mean absolute relative orientation, so a goal
straight ahead scores highest.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .fields import GridGeometry


class HeadingUndefined(ValueError):
    """Raised when a track has no nonzero displacement to take a heading from."""


@dataclass
class TrackHistory:
    t: np.ndarray
    xy: np.ndarray  # (n, 2)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float).reshape(-1)
        self.xy = np.asarray(self.xy, dtype=float).reshape(-1, 2)
        if len(self.t) != len(self.xy):
            raise ValueError("times and positions differ in length")
        if np.any(np.diff(self.t) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        if not np.all(np.isfinite(self.xy)):
            raise ValueError("track positions must be finite")

    @classmethod
    def from_samples(cls, samples) -> "TrackHistory":
        arr = np.asarray(samples, dtype=float).reshape(-1, 3)
        return cls(arr[:, 0], arr[:, 1:])

    def __len__(self):
        return len(self.t)

    def window(self, end: int, length: int | None = None) -> "TrackHistory":
        """Samples ``[end - length, end)`` (or all samples before ``end``)."""
        start = 0 if length is None else max(0, end - length)
        return TrackHistory(self.t[start:end], self.xy[start:end])

    def until(self, t: float) -> "TrackHistory":
        k = int(np.searchsorted(self.t, t, side="right"))
        return TrackHistory(self.t[:k], self.xy[:k])

    def speeds(self) -> np.ndarray:
        return np.linalg.norm(np.diff(self.xy, axis=0), axis=1) / np.diff(self.t)


def load_track(path) -> TrackHistory:
    """CSV with header ``t,x,y``."""
    with open(path, newline="") as fh:
        rows = [(float(r["t"]), float(r["x"]), float(r["y"])) for r in csv.DictReader(fh)]
    return TrackHistory.from_samples(rows)


def save_track(track: TrackHistory, path) -> None:
    lines = ["t,x,y"] + [f"{t:.6f},{x:.6f},{y:.6f}" for t, (x, y) in zip(track.t, track.xy)]
    Path(path).write_text("\n".join(lines) + "\n")


@dataclass(frozen=True)
class IntentConfig:
    lam: float = 1.0
    n_window: int = 10
    v_thres: float = 0.3

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("lam must be positive")
        if self.n_window < 2:
            raise ValueError("n_window must be at least 2")


# ---------------------------------------------------------------------------
# occupancy analysis

@dataclass
class FrequencyGrid:
    geometry: GridGeometry
    counts: np.ndarray = None
    v_thres: float = 0.3

    def __post_init__(self):
        if self.counts is None:
            self.counts = np.zeros(self.geometry.shape, dtype=np.int64)

    @classmethod
    def covering(cls, points, cell_size: float = 0.5, margin: float = 1.0,
                 v_thres: float = 0.3) -> "FrequencyGrid":
        """Grid whose cells are aligned to multiples of ``cell_size`` and cover ``points``."""
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        lo = np.floor((pts.min(axis=0) - margin) / cell_size) * cell_size
        hi = np.ceil((pts.max(axis=0) + margin) / cell_size) * cell_size
        w, h = (np.round((hi - lo) / cell_size).astype(int) + 1).tolist()
        return cls(GridGeometry((float(lo[0]), float(lo[1])), cell_size, w, h), v_thres=v_thres)


def update_frequency_grid(grid: FrequencyGrid, history: TrackHistory) -> FrequencyGrid:
    """Count, per cell, the samples arriving there at a speed below ``v_thres``."""
    counts = grid.counts.copy()
    if len(history) >= 2:
        slow = history.speeds() < grid.v_thres
        for p in history.xy[1:][slow]:
            ix, iy = grid.geometry.world_to_cell(p)
            if grid.geometry.contains_cell(ix, iy):
                counts[iy, ix] += 1
    return FrequencyGrid(grid.geometry, counts, grid.v_thres)


@dataclass
class GoalSet:
    positions: np.ndarray  # (K, 2)
    counts: np.ndarray  # (K,)

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 2)
        self.counts = np.asarray(self.counts, dtype=float).reshape(-1)
        if len(self.positions) != len(self.counts):
            raise ValueError("positions and counts differ in length")
        if np.any(self.counts <= 0):
            raise ValueError("goal counts must be positive")

    @classmethod
    def uniform(cls, positions) -> "GoalSet":
        positions = np.asarray(positions, dtype=float).reshape(-1, 2)
        return cls(positions, np.ones(len(positions)))

    def __len__(self):
        return len(self.counts)

    @property
    def prior(self) -> np.ndarray:
        return self.counts / self.counts.sum()

    def add_goal(self, position, pseudo_count: float = 1.0) -> "GoalSet":
        """Add a goal known from elsewhere (e.g. semantics) with a pseudo-count."""
        return GoalSet(np.vstack([self.positions, np.reshape(position, (1, 2))]),
                       np.append(self.counts, pseudo_count))


def extract_goals(grid: FrequencyGrid) -> GoalSet:
    """Goals from cells visited more than half as often as the busiest cell.

    8-connected selected cells merge into one goal at their count-weighted mean.
    """
    counts = grid.counts
    n_max = counts.max() if counts.size else 0
    if n_max <= 0:
        return GoalSet(np.empty((0, 2)), np.empty(0))
    selected = counts > n_max / 2.0
    labels, k = ndimage.label(selected, structure=np.ones((3, 3), dtype=int))
    X, Y = grid.geometry.cell_centers()
    positions, totals = [], []
    for lab in range(1, k + 1):
        m = labels == lab
        w = counts[m].astype(float)
        positions.append([np.sum(w * X[m]) / w.sum(), np.sum(w * Y[m]) / w.sum()])
        totals.append(w.sum())
    return GoalSet(np.array(positions), np.array(totals))


def load_goals(path) -> GoalSet:
    """One ``x y N_k`` line per goal; blank lines and ``#`` comments are skipped."""
    rows = []
    for ln in Path(path).read_text().splitlines():
        ln = ln.split("#", 1)[0].strip()
        if ln:
            x, y, n = ln.split()
            rows.append((float(x), float(y), float(n)))
    if not rows:
        return GoalSet(np.empty((0, 2)), np.empty(0))
    arr = np.array(rows)
    return GoalSet(arr[:, :2], arr[:, 2])


def save_goals(goals: GoalSet, path) -> None:
    lines = [f"{x:.6f} {y:.6f} {n:g}" for (x, y), n in zip(goals.positions, goals.counts)]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


# ---------------------------------------------------------------------------
# recognition

def wrap_angle(a):
    """Wrap to (-pi, pi]."""
    w = np.mod(np.asarray(a, dtype=float) + math.pi, 2 * math.pi) - math.pi
    w = np.where(w == -math.pi, math.pi, w)
    return float(w) if np.ndim(w) == 0 else w


def _headings(xy: np.ndarray) -> np.ndarray:
    """Heading at each sample from its incoming displacement (NaN where undefined).

    A zero displacement reuses the previous heading.
    """
    out = np.full(len(xy), np.nan)
    prev = np.nan
    for i in range(1, len(xy)):
        dx, dy = xy[i] - xy[i - 1]
        if dx != 0.0 or dy != 0.0:
            prev = math.atan2(dy, dx)
        out[i] = prev
    return out


def estimate_heading(history: TrackHistory) -> float:
    h = _headings(history.xy)
    if len(h) < 2 or np.isnan(h[-1]):
        raise HeadingUndefined("heading undefined")
    return wrap_angle(h[-1])


def relative_orientations(history: TrackHistory, goal, config: IntentConfig) -> np.ndarray:
    """Wrapped goal-bearing minus heading over the last ``n_window`` samples with a heading."""
    xy = history.xy
    h = _headings(xy)
    idx = np.arange(len(xy))[~np.isnan(h)][-config.n_window:]
    if idx.size == 0:
        raise HeadingUndefined("heading undefined")
    g = np.asarray(goal, dtype=float)
    bearing = np.arctan2(g[1] - xy[idx, 1], g[0] - xy[idx, 0])
    return wrap_angle(bearing - h[idx])


def averaged_relative_orientation(history: TrackHistory, goal, config: IntentConfig) -> float:
    """Mean absolute relative orientation, in [0, pi]."""
    return float(np.mean(np.abs(relative_orientations(history, goal, config))))


def goal_likelihood(mean_rel_orient, lam: float = 1.0) -> np.ndarray:
    z = -lam * np.asarray(mean_rel_orient, dtype=float)
    z -= z.max()
    e = np.exp(z)
    return e / e.sum()


@dataclass(frozen=True)
class IntentPosterior:
    probs: np.ndarray
    mean_rel_orient: np.ndarray
    informative: bool = True

    @property
    def map_index(self) -> int:
        return int(np.argmax(self.probs))  # first maximum wins ties

    @property
    def map_prob(self) -> float:
        return float(self.probs[self.map_index])


def intent_posterior(history: TrackHistory, goals: GoalSet,
                     config: IntentConfig = IntentConfig()) -> IntentPosterior:
    """Posterior over goals; falls back to the prior when no heading is available."""
    if len(goals) == 0:
        raise ValueError("goal set is empty")
    prior = goals.prior
    try:
        rel = np.array([averaged_relative_orientation(history, g, config)
                        for g in goals.positions])
    except HeadingUndefined:
        return IntentPosterior(prior.copy(), np.full(len(goals), np.nan), informative=False)
    post = prior * goal_likelihood(rel, config.lam)
    return IntentPosterior(post / post.sum(), rel)


def discover_goals(tracks, cell_size: float = 0.5, v_thres: float = 0.3) -> GoalSet:
    """Run occupancy analysis over several tracks on one shared grid."""
    tracks = list(tracks)
    grid = FrequencyGrid.covering(np.vstack([t.xy for t in tracks]), cell_size, v_thres=v_thres)
    for tr in tracks:
        grid = update_frequency_grid(grid, tr)
    return extract_goals(grid)
