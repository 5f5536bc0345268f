"""Closed-loop simulation: scripted humans, a prediction mode, and the planner."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from ..fields import (CompositeSequence, build_composite_sequence, composite_min, compute_edt,
                      disc_field)
from ..intent import TrackHistory
from ..planner import PlannerConfig, RecedingHorizonPlanner
from ..prediction import PredictionConfig, cvm_predict, predict_trajectory
from .scenario import Scenario

log = logging.getLogger(__name__)

SIM_MODES = ("none", "cvm", "proposed")


@dataclass
class TickRecord:
    time: float
    robot: np.ndarray
    humans: np.ndarray  # (H, 2)
    decision: str = ""
    cost: float = math.nan
    min_distance: float = math.inf


@dataclass
class SimLog:
    scenario: str
    mode: str
    robot_radius: float
    human_radii: list
    ticks: list = field(default_factory=list)
    cycles: list = field(default_factory=list)  # planner CycleRecords
    predictions: list = field(default_factory=list)  # (time, human index, (n, 2) positions)
    reached_goal: bool = False

    @property
    def min_distance(self) -> float:
        return min((r.min_distance for r in self.ticks), default=math.inf)

    @property
    def collision_threshold(self) -> float:
        return self.robot_radius + (max(self.human_radii) if self.human_radii else 0.0)

    @property
    def collided(self) -> bool:
        return any(np.any(np.linalg.norm(r.humans - r.robot, axis=1)
                          < self.robot_radius + np.asarray(self.human_radii))
                   for r in self.ticks if len(r.humans))

    def to_csv(self) -> str:
        n_h = len(self.human_radii)
        head = ["time", "robot_x", "robot_y"]
        for i in range(n_h):
            head += [f"human{i}_x", f"human{i}_y"]
        head += ["decision", "cost", "min_distance"]
        lines = [",".join(head)]
        for r in self.ticks:
            row = [f"{r.time:.2f}", f"{r.robot[0]:.6f}", f"{r.robot[1]:.6f}"]
            for p in r.humans:
                row += [f"{p[0]:.6f}", f"{p[1]:.6f}"]
            row += [r.decision, "" if math.isnan(r.cost) else f"{r.cost:.6g}",
                    "" if math.isinf(r.min_distance) else f"{r.min_distance:.6f}"]
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"

    def cycles_csv(self) -> str:
        lines = ["time,cost,decision,valid,min_clearance"]
        for c in self.cycles:
            clr = "" if math.isinf(c.min_clearance) else f"{c.min_clearance:.6f}"
            lines.append(f"{c.time:.2f},{c.cost:.6g},{c.decision},{int(c.valid)},{clr}")
        return "\n".join(lines) + "\n"

    def predictions_csv(self) -> str:
        lines = ["time,human,step,x,y"]
        for t, h, pts in self.predictions:
            for j, (x, y) in enumerate(pts):
                lines.append(f"{t:.2f},{h},{j},{x:.6f},{y:.6f}")
        return "\n".join(lines) + "\n"

    def write(self, out_dir) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        files = {f"{self.mode}_ticks.csv": self.to_csv(),
                 f"{self.mode}_cycles.csv": self.cycles_csv(),
                 f"{self.mode}_predictions.csv": self.predictions_csv()}
        paths = []
        for name, text in files.items():
            (out / name).write_text(text)
            paths.append(out / name)
        return paths


def _with_overrides(cfg, overrides: dict):
    valid = {f.name for f in fields(cfg)}
    unknown = set(overrides) - valid
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    if "horizons" in overrides:
        overrides = dict(overrides, horizons=tuple(overrides["horizons"]))
    return replace(cfg, **overrides)


def scenario_configs(scenario: Scenario) -> tuple[PlannerConfig, PredictionConfig]:
    pcfg = _with_overrides(PlannerConfig(robot_radius=scenario.robot.radius), scenario.planner)
    qcfg = _with_overrides(PredictionConfig(), scenario.prediction)
    return pcfg, qcfg


def run_closed_loop(scenario: Scenario, mode: str, seed: int | None = None,
                    planner_config: PlannerConfig | None = None,
                    prediction_config: PredictionConfig | None = None,
                    history_seconds: float = 3.0) -> SimLog:
    """Simulate ``scenario`` with predictions from ``mode`` (none, cvm or proposed).

    Perception returns exact human positions plus optional Gaussian noise of
    ``scenario.noise_sigma``.  The planner cycles every ``planner.dt`` seconds.
    """
    if mode not in SIM_MODES:
        raise ValueError(f"mode must be one of {SIM_MODES}")
    pcfg, qcfg = scenario_configs(scenario)
    pcfg = planner_config or pcfg
    qcfg = prediction_config or qcfg
    rng = np.random.default_rng(scenario.seed if seed is None else seed)

    env = compute_edt(scenario.grid)
    humans = scenario.build_humans()
    reach = pcfg.epsilon + pcfg.robot_radius + scenario.grid.geometry.cell_size
    prims = {}
    for h in humans:
        if h.radius not in prims:
            prims[h.radius] = disc_field(h.radius, env.geometry.cell_size, reach)
    radii = [h.radius for h in humans]

    planner = RecedingHorizonPlanner(scenario.robot.goal, pcfg)
    robot = np.r_[np.asarray(scenario.robot.start, float), 0.0, 0.0]
    simlog = SimLog(scenario.name, mode, pcfg.robot_radius, radii)
    per_cycle = max(1, int(round(pcfg.dt / scenario.tick)))
    n_hist = max(2, int(round(history_seconds / scenario.tick)))
    hist_t = [[] for _ in humans]
    hist_xy = [[] for _ in humans]
    n_ticks = int(round(scenario.duration / scenario.tick))
    horizon = pcfg.n * pcfg.dt

    for k in range(n_ticks + 1):
        t = round(k * scenario.tick, 9)
        truth = np.array([h.position_at(t) for h in humans]).reshape(-1, 2)
        for i, p in enumerate(truth):
            noise = rng.normal(0.0, scenario.noise_sigma, 2) if scenario.noise_sigma > 0 else 0.0
            hist_t[i].append(t)
            hist_xy[i].append(p + noise)
            del hist_t[i][:-n_hist], hist_xy[i][:-n_hist]

        record = TickRecord(t, robot[:2].copy(), truth)
        if k % per_cycle == 0 and not planner.terminal:
            preds_by_radius = {}
            for i, h in enumerate(humans):
                hist = TrackHistory(hist_t[i], hist_xy[i])
                pts = _predict_positions(mode, hist, scenario, env, robot[:2], qcfg,
                                         pcfg, horizon)
                simlog.predictions.append((t, i, pts))
                preds_by_radius.setdefault(h.radius, []).append(pts)
            seq = _sequence(env, prims, preds_by_radius, pcfg, t)
            rec = planner.cycle(t, robot, seq)
            simlog.cycles.append(rec)
            record.decision = rec.decision
            record.cost = rec.cost
        if len(truth):
            record.min_distance = float(np.min(np.linalg.norm(truth - robot[:2], axis=1)))
        simlog.ticks.append(record)
        if k < n_ticks:
            robot = planner.robot_state(round((k + 1) * scenario.tick, 9))
    simlog.reached_goal = bool(
        np.linalg.norm(robot[:2] - np.asarray(scenario.robot.goal)) <= pcfg.nominal_speed * pcfg.dt)
    log.info("%s/%s: min distance %.3f, reached goal %s", scenario.name, mode,
             simlog.min_distance, simlog.reached_goal)
    return simlog


def _predict_positions(mode, hist, scenario, env, robot_xy, qcfg, pcfg, horizon):
    times = hist.t[-1] + pcfg.dt * np.arange(pcfg.n)
    if mode == "none" or len(hist) < 2:
        return np.tile(hist.xy[-1], (pcfg.n, 1))
    if mode == "cvm":
        res = cvm_predict(hist, horizon, pcfg.dt)
    else:
        res = predict_trajectory(hist, scenario.goal_set, env, robot_xy, qcfg, horizon=horizon)
    pts = res.positions_at(times)
    pts[0] = hist.xy[-1]
    return pts


def _sequence(env, prims, preds_by_radius, pcfg, t):
    if not preds_by_radius:
        return build_composite_sequence(env, [], None, pcfg.n, pcfg.dt, t)
    radii = sorted(preds_by_radius)
    seq = build_composite_sequence(env, preds_by_radius[radii[0]], prims[radii[0]],
                                   pcfg.n, pcfg.dt, t)
    for r in radii[1:]:
        # humans of other sizes composite onto the first pass, entry by entry
        fields_ = tuple(composite_min(seq[j], [(prims[r], traj[min(j, len(traj) - 1)])
                                               for traj in preds_by_radius[r]])
                        for j in range(pcfg.n))
        seq = CompositeSequence(fields_, pcfg.dt, t)
    return seq
