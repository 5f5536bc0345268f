"""Human trajectory prediction: goal-directed GP factor graphs and CV/LV baselines."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .factors import (FactorGraph, LMConfig, ObstacleFactor, PriorFactor, RobotFactor,
                      build_gp_chain, lm_optimize)
from .fields import DistanceField
from .gp import GPTrajectory, constant_velocity_rollout, straight_line_init
from .intent import GoalSet, IntentConfig, TrackHistory, intent_posterior

MODES = ("proposed", "proposed-no-goal", "cvm", "lvm", "stationary")


@dataclass(frozen=True)
class PredictionConfig:
    qc: float = 0.2
    dt: float = 0.5
    sigma_obs: float = 0.1
    epsilon: float = 0.4
    sigma_r: float = 0.1
    epsilon_r: float = 0.8
    lam: float = 1.0
    n_window: int = 10
    v_thres: float = 0.3
    p_min: float = 0.4
    horizons: tuple = (1.6, 3.2, 4.8, 8.0)
    start_sigma: float = 1e-4  # covariance of the start prior
    goal_sigma: float = 1e-4  # covariance of the goal prior
    use_intent: bool = True
    use_robot_factor: bool = True
    max_supports: int = 60
    lm: LMConfig = field(default_factory=LMConfig)

    def __post_init__(self):
        h = tuple(float(x) for x in self.horizons)
        if not h or min(h) <= 0 or any(b <= a for a, b in zip(h, h[1:])):
            raise ValueError("horizons must be positive and ascending")
        if not 0 <= self.p_min < 1:
            raise ValueError("p_min must lie in [0, 1)")
        object.__setattr__(self, "horizons", h)

    @property
    def intent(self) -> IntentConfig:
        return IntentConfig(self.lam, self.n_window, self.v_thres)

    @property
    def max_horizon(self) -> float:
        return self.horizons[-1]


@dataclass
class PredictionResult:
    trajectory: GPTrajectory
    mode: str
    goal: np.ndarray | None = None
    goal_prob: float | None = None
    duration: float | None = None  # estimated time to reach the goal
    qc: float = 0.2

    @property
    def t0(self) -> float:
        return self.trajectory.t0

    def position_at(self, t: float) -> np.ndarray:
        """Predicted position at absolute time ``t``.

        Goal-directed predictions hold the goal after the estimated arrival.
        Baselines interpolate linearly between supports, the GP modes use GP
        interpolation; past the last support all modes continue at constant
        velocity.
        """
        traj = self.trajectory
        if self.goal is not None and self.duration is not None and t - traj.t0 >= self.duration:
            return np.array(self.goal, dtype=float)
        if t >= traj.t_end:
            last = traj.states[-1]
            return last[:2] + last[2:] * (t - traj.t_end)
        if self.mode in ("cvm", "lvm", "stationary"):
            ts = traj.times
            return np.array([np.interp(t, ts, traj.states[:, 0]),
                             np.interp(t, ts, traj.states[:, 1])])
        return traj.state_at(t, self.qc)[:2]

    def positions_at(self, times) -> np.ndarray:
        return np.array([self.position_at(t) for t in times]).reshape(-1, 2)


def _last_velocity(history: TrackHistory) -> np.ndarray:
    if len(history) < 2:
        return np.zeros(2)
    return (history.xy[-1] - history.xy[-2]) / (history.t[-1] - history.t[-2])


def _rollout_result(history, velocity, horizon, dt, mode) -> PredictionResult:
    n = max(1, math.ceil(horizon / dt - 1e-9))
    state = np.concatenate([history.xy[-1], velocity])
    return PredictionResult(constant_velocity_rollout(state, n, dt, history.t[-1]), mode)


def cvm_predict(history: TrackHistory, horizon: float, dt: float) -> PredictionResult:
    """Propagate the last observed velocity."""
    return _rollout_result(history, _last_velocity(history), horizon, dt, "cvm")


def lvm_predict(history: TrackHistory, horizon: float, dt: float) -> PredictionResult:
    """Propagate the average velocity over the whole given history."""
    if len(history) < 2 or history.t[-1] == history.t[0]:
        v = np.zeros(2)
    else:
        v = (history.xy[-1] - history.xy[0]) / (history.t[-1] - history.t[0])
    return _rollout_result(history, v, horizon, dt, "lvm")


def estimate_time_to_goal(position, goal, speed: float, v_thres: float = 0.3) -> float | None:
    """Distance over speed; ``None`` flags a stationary agent (speed below ``v_thres``)."""
    if speed < 0:
        raise ValueError("speed must be non-negative")
    if speed < v_thres:
        return None
    return float(np.linalg.norm(np.asarray(goal, float) - np.asarray(position, float))) / speed


def current_motion(history: TrackHistory, n_window: int) -> tuple[np.ndarray, float]:
    """Average velocity and mean speed over the last ``n_window`` samples."""
    w = history.window(len(history), n_window)
    if len(w) < 2:
        return np.zeros(2), 0.0
    v = (w.xy[-1] - w.xy[0]) / (w.t[-1] - w.t[0])
    return v, float(np.mean(w.speeds()))


def _add_likelihood_factors(graph, env_field, robot_position, config):
    for i in range(1, graph.n_states - 1):
        if env_field is not None:
            graph.add(ObstacleFactor(i, env_field, config.epsilon, config.sigma_obs))
        if robot_position is not None and config.use_robot_factor:
            graph.add(RobotFactor(i, robot_position, config.epsilon_r, config.sigma_r))


def predict_trajectory(history: TrackHistory, goals: GoalSet | None,
                       env_field: DistanceField | None, robot_position=None,
                       config: PredictionConfig = PredictionConfig(),
                       horizon: float | None = None) -> PredictionResult:
    """Goal-directed prediction, falling back to an obstacle-aware CV model.

    ``horizon`` (default: the largest configured horizon) sets how far the
    goal-free prediction is optimized.
    """
    horizon = config.max_horizon if horizon is None else horizon
    t_now = float(history.t[-1])
    p = history.xy[-1].copy()
    v, speed = current_motion(history, config.n_window)

    def stationary():
        states = np.tile(np.concatenate([p, [0.0, 0.0]]), (2, 1))
        return PredictionResult(GPTrajectory(states, t_now, max(horizon, config.dt)),
                                "stationary", qc=config.qc)

    if speed < config.v_thres:
        return stationary()

    goal, goal_prob = None, None
    if config.use_intent and goals is not None and len(goals) > 0:
        post = intent_posterior(history, goals, config.intent)
        if post.informative and post.map_prob >= config.p_min:
            goal = goals.positions[post.map_index].copy()
            goal_prob = post.map_prob

    start_state = np.concatenate([p, v])
    if goal is None:
        n = max(2, math.ceil(horizon / config.dt - 1e-9))
        dt = config.dt
        init = constant_velocity_rollout(start_state, n, dt, t_now)
        duration = None
        mode = "proposed-no-goal"
    else:
        duration = estimate_time_to_goal(p, goal, speed, config.v_thres)
        if duration < 1e-6:
            return PredictionResult(GPTrajectory(np.tile(np.r_[goal, 0.0, 0.0], (2, 1)),
                                                 t_now, config.dt),
                                    "proposed", goal, goal_prob, 0.0, config.qc)
        n = min(max(1, math.ceil(duration / config.dt - 1e-9)), config.max_supports)
        dt = duration / n
        init = straight_line_init(p, goal, n, dt, t_now)
        mode = "proposed"

    graph = FactorGraph(n + 1, dt)
    graph.add(PriorFactor(0, start_state, config.start_sigma, "start"))
    if goal is not None:
        graph.add(PriorFactor(n, goal, config.goal_sigma, "goal"))
    build_gp_chain(graph, config.qc)
    _add_likelihood_factors(graph, env_field, robot_position, config)
    traj = lm_optimize(graph, init, config.lm).trajectory

    if goal is not None and traj.t_end - t_now < horizon:
        extra = math.ceil((horizon - (traj.t_end - t_now)) / dt - 1e-9)
        pad = np.tile(np.r_[goal, 0.0, 0.0], (extra, 1))
        traj = GPTrajectory(np.vstack([traj.states, pad]), traj.t0, traj.dt)
    return PredictionResult(traj, mode, goal, goal_prob, duration, config.qc)


def ablation_config(config: PredictionConfig, name: str) -> PredictionConfig:
    """Config for one of the named ablations: ``no-intent`` or ``no-robot-factor``."""
    if name == "no-intent":
        return replace(config, use_intent=False)
    if name == "no-robot-factor":
        return replace(config, use_robot_factor=False)
    raise ValueError(f"unknown ablation {name!r}")


# ---------------------------------------------------------------------------
# metrics

def _displacements(pred, truth) -> np.ndarray:
    pred = np.asarray(pred, dtype=float).reshape(-1, 2)
    truth = np.asarray(truth, dtype=float).reshape(-1, 2)
    if truth.size == 0:
        raise ValueError("empty ground truth")
    if pred.shape != truth.shape:
        raise ValueError("prediction and truth are not aligned")
    return np.linalg.norm(pred - truth, axis=1)


def ade(pred, truth) -> float:
    """Mean displacement between aligned predicted and true positions."""
    return float(np.mean(_displacements(pred, truth)))


def fde(pred, truth) -> float:
    """Displacement of the final aligned point."""
    return float(_displacements(pred, truth)[-1])


def errors_against(result: PredictionResult, truth: TrackHistory) -> tuple[float, float]:
    """ADE and FDE of ``result`` resampled at the truth timestamps."""
    pred = result.positions_at(truth.t)
    return ade(pred, truth.xy), fde(pred, truth.xy)
