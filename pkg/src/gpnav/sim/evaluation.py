"""Sliding-window ADE/FDE evaluation of the predictors over recorded tracks."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..fields import DistanceField
from ..intent import GoalSet, TrackHistory
from ..prediction import (PredictionConfig, ablation_config, ade, cvm_predict, fde, lvm_predict,
                          predict_trajectory)

log = logging.getLogger(__name__)

EVAL_METHODS = ("cvm", "lvm", "proposed", "proposed-no-intent", "proposed-no-robot-factor")


@dataclass
class EvalReport:
    horizons: tuple
    methods: tuple
    ade: dict = field(default_factory=dict)  # (method, horizon) -> list of per-window ADE
    fde: dict = field(default_factory=dict)
    n_tracks: int = 0
    skipped: int = 0

    def _stats(self, table, method, horizon) -> tuple[float, float]:
        vals = np.asarray(table[(method, horizon)], dtype=float)
        if vals.size == 0:
            return math.nan, math.nan
        if vals.size == 1:
            return float(vals[0]), 0.0
        return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(vals.size))

    def ade_stats(self, method, horizon):
        """Mean and standard error of ADE over all evaluation windows."""
        return self._stats(self.ade, method, horizon)

    def fde_stats(self, method, horizon):
        return self._stats(self.fde, method, horizon)

    @property
    def n_windows(self) -> int:
        return len(self.ade[(self.methods[0], self.horizons[0])]) if self.methods else 0

    def _csv(self, metric: str) -> str:
        stats = self.ade_stats if metric == "ade" else self.fde_stats
        lines = [f"method,horizon,{metric}_mean,{metric}_stderr"]
        for m in self.methods:
            for h in self.horizons:
                mean, se = stats(m, h)
                lines.append(f"{m},{h:.1f},{mean:.6f},{se:.6f}")
        return "\n".join(lines) + "\n"

    def ade_csv(self) -> str:
        return self._csv("ade")

    def fde_csv(self) -> str:
        return self._csv("fde")

    def table(self) -> str:
        """Methods by horizons, cells ``ADE/FDE``."""
        head = f"{'method':<26}" + "".join(f"{h:>14.1f}s" for h in self.horizons)
        rows = [head]
        for m in self.methods:
            cells = "".join(f"{self.ade_stats(m, h)[0]:>8.3f}/{self.fde_stats(m, h)[0]:<6.3f}"
                            for h in self.horizons)
            rows.append(f"{m:<26}{cells}")
        return "\n".join(rows)


def _predictor(method: str, config: PredictionConfig):
    if method == "cvm":
        return lambda hist, goals, env, robot, h: cvm_predict(hist, h, config.dt)
    if method == "lvm":
        return lambda hist, goals, env, robot, h: lvm_predict(hist, h, config.dt)
    if method == "proposed":
        cfg = config
    elif method == "proposed-no-intent":
        cfg = ablation_config(config, "no-intent")
    elif method == "proposed-no-robot-factor":
        cfg = ablation_config(config, "no-robot-factor")
    else:
        raise ValueError(f"unknown method {method!r}")
    return lambda hist, goals, env, robot, h: predict_trajectory(hist, goals, env, robot, cfg,
                                                                 horizon=h)


def _robot_at(robot: TrackHistory | None, t: float):
    if robot is None or len(robot) == 0 or t < robot.t[0] or t > robot.t[-1]:
        return None
    return np.array([np.interp(t, robot.t, robot.xy[:, 0]), np.interp(t, robot.t, robot.xy[:, 1])])


def run_prediction_eval(tracks, env: DistanceField | None, goals: GoalSet | None,
                        config: PredictionConfig = PredictionConfig(),
                        methods=EVAL_METHODS, obs_len: int = 10, stride: int = 1,
                        robot: TrackHistory | None = None) -> EvalReport:
    """Predict every horizon from every observation point of every track.

    At sample ``k`` (once ``obs_len`` samples are available and the track
    extends past ``t_k`` plus the largest horizon) each method sees samples
    ``k - obs_len + 1 .. k``; ADE and FDE for horizon ``H`` are computed over
    the true samples in ``(t_k, t_k + H]``.  ``robot`` is an optional robot
    track, interpolated at ``t_k``, feeding the robot-avoidance factor.
    """
    if obs_len < 2 or stride < 1:
        raise ValueError("obs_len must be >= 2 and stride >= 1")
    horizons = tuple(config.horizons)
    methods = tuple(methods)
    predictors = {m: _predictor(m, config) for m in methods}
    report = EvalReport(horizons, methods)
    for m in methods:
        for h in horizons:
            report.ade[(m, h)] = []
            report.fde[(m, h)] = []
    h_max = horizons[-1]
    for ti, track in enumerate(tracks):
        if len(track) < obs_len + 1 or track.t[-1] - track.t[obs_len - 1] < h_max - 1e-9:
            log.warning("track %d too short for the %.1f s horizon; skipped", ti, h_max)
            report.skipped += 1
            continue
        report.n_tracks += 1
        for k in range(obs_len - 1, len(track), stride):
            t_k = track.t[k]
            if track.t[-1] - t_k < h_max - 1e-9:
                break
            hist = TrackHistory(track.t[k - obs_len + 1:k + 1], track.xy[k - obs_len + 1:k + 1])
            ahead = track.t[k + 1:] - t_k <= h_max + 1e-9
            future_t = track.t[k + 1:][ahead]
            future_xy = track.xy[k + 1:][ahead]
            robot_xy = _robot_at(robot, t_k)
            for m in methods:
                res = predictors[m](hist, goals, env, robot_xy, h_max)
                pred = res.positions_at(future_t)
                for h in horizons:
                    sel = future_t - t_k <= h + 1e-9
                    report.ade[(m, h)].append(ade(pred[sel], future_xy[sel]))
                    report.fde[(m, h)].append(fde(pred[sel], future_xy[sel]))
    return report


def export_results(report, out_dir) -> list[Path]:
    """Write a report's CSV files into ``out_dir``; returns the written paths.

    Accepts an :class:`EvalReport` (``ade.csv``, ``fde.csv``, ``windows.csv``
    with one row per window for plotting) or a bench report with a ``to_csv``
    method (``bench.csv``).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if isinstance(report, EvalReport):
        files = {"ade.csv": report.ade_csv(), "fde.csv": report.fde_csv(),
                 "windows.csv": _windows_csv(report)}
    else:
        files = {"bench.csv": report.to_csv()}
    paths = []
    for name, text in files.items():
        (out / name).write_text(text)
        paths.append(out / name)
    return paths


def _windows_csv(report: EvalReport) -> str:
    lines = ["method,horizon,window,ade,fde"]
    for m in report.methods:
        for h in report.horizons:
            for w, (a, f) in enumerate(zip(report.ade[(m, h)], report.fde[(m, h)])):
                lines.append(f"{m},{h:.1f},{w},{a:.6f},{f:.6f}")
    return "\n".join(lines) + "\n"
