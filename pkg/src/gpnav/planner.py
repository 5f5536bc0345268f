"""Receding-horizon GP motion planning for a disc robot over time-indexed fields.

Support ``i`` of a plan reads composite field ``i`` for ``i < n`` and the last
field beyond.  Each cycle the previous plan is shifted to the current time,
re-optimized against fresh fields, and either kept, replaced, or rebuilt from
a straight line.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .factors import (FactorGraph, LMConfig, ObstacleFactor, PriorFactor, build_gp_chain,
                      lm_optimize)
from .fields import CompositeSequence, sample_field
from .gp import GPTrajectory, straight_line_init

KEEP, ADOPT, REINIT = "keep", "adopt", "reinit"


@dataclass(frozen=True)
class PlannerConfig:
    dt: float = 0.5
    n: int = 20
    robot_radius: float = 0.3
    epsilon: float = 0.6  # clearance beyond the robot radius at which cost starts
    sigma_obs: float = 0.1
    qc: float = 0.2
    rho: float = 0.1
    nominal_speed: float = 0.3
    start_sigma: float = 1e-4
    goal_sigma: float = 1e-4
    lm: LMConfig = field(default_factory=lambda: LMConfig(max_iterations=50))

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not 0 < self.rho < 1:
            raise ValueError("rho must lie in (0, 1)")
        if self.dt <= 0 or self.nominal_speed <= 0 or self.robot_radius < 0:
            raise ValueError("dt and nominal_speed must be positive")


@dataclass
class PlanState:
    trajectory: GPTrajectory
    cost: float
    execution_index: int
    goal: np.ndarray  # 4-vector goal state
    sequence: CompositeSequence | None = None
    time_to_goal: float = 0.0
    terminal: bool = False
    arrival: int = 0  # support index from which the plan holds the goal


def supports_for(distance: float, config: PlannerConfig) -> tuple[int, int]:
    """``(arrival_index, total_intervals)`` for a remaining path length."""
    arrival = max(1, math.ceil(distance / config.nominal_speed / config.dt - 1e-9))
    return arrival, max(arrival, config.n)


def build_plan_graph(start, goal, seq: CompositeSequence, config: PlannerConfig,
                     n_supports: int | None = None, arrival: int | None = None) -> FactorGraph:
    """Start prior, goal priors from ``arrival`` to the end, GP chain and obstacle factors.

    Obstacle factor ``i`` (``i >= 1``) reads ``seq.at_index(i)``; its reach is
    ``epsilon`` plus the robot radius.
    """
    start = np.asarray(start, dtype=float)
    goal = np.asarray(goal, dtype=float)
    if goal.size == 2:
        goal = np.r_[goal, 0.0, 0.0]
    if n_supports is None:
        arrival, n_supports = supports_for(np.linalg.norm(goal[:2] - start[:2]), config)
    if n_supports < 1:
        raise ValueError("plan horizon must be at least one step")
    if arrival is None:
        arrival = n_supports
    if len(seq) == 0:
        raise ValueError("empty composite sequence")
    graph = FactorGraph(n_supports + 1, config.dt)
    graph.add(PriorFactor(0, start, config.start_sigma, "start"))
    for i in range(min(arrival, n_supports), n_supports + 1):
        graph.add(PriorFactor(i, goal, config.goal_sigma, "goal"))
    build_gp_chain(graph, config.qc)
    reach = config.epsilon + config.robot_radius
    for i in range(1, n_supports + 1):
        graph.add(ObstacleFactor(i, seq.at_index(i), reach, config.sigma_obs))
    return graph


def check_validity(traj: GPTrajectory, seq: CompositeSequence,
                   config: PlannerConfig) -> tuple[bool, int | None]:
    """Every future support must clear its time-matched field by the robot radius.

    Supports at or before ``seq.t0`` count as executed and are skipped.
    Returns ``(valid, first_violating_support_index)``.
    """
    for i, (t, p) in enumerate(zip(traj.times, traj.positions)):
        j = int(round((t - seq.t0) / seq.dt))
        if j < 1:
            continue
        d, _, oob = sample_field(seq.at_index(j), p)
        if oob or d <= config.robot_radius:
            return False, i
    return True, None


def replan_decision(current_cost: float, reoptimized_cost: float, current_valid: bool,
                    reoptimized_valid: bool, rho: float = 0.1) -> str:
    if not current_valid:
        return ADOPT if reoptimized_valid else REINIT
    if not reoptimized_valid or current_cost <= 0:
        return KEEP
    improvement = (current_cost - reoptimized_cost) / current_cost
    return ADOPT if improvement > rho else KEEP


def remaining_path_length(traj: GPTrajectory, index: int, position) -> float:
    pts = np.vstack([np.reshape(position, (1, 2)), traj.positions[index + 1:]])
    return float(np.sum(np.linalg.norm(np.diff(pts, axis=0), axis=1)))


def step_execution(state: PlanState, sim_time: float, position,
                   config: PlannerConfig) -> PlanState:
    """Advance the execution index to ``sim_time`` and refresh time-to-goal."""
    traj = state.trajectory
    k = int(math.floor((sim_time - traj.t0) / traj.dt + 1e-9))
    k = min(max(k, 0), traj.n_intervals)
    remaining = remaining_path_length(traj, k, position)
    to_goal = float(np.linalg.norm(state.goal[:2] - np.asarray(position, float)[:2]))
    terminal = to_goal <= config.nominal_speed * config.dt
    return replace(state, execution_index=k, time_to_goal=remaining / config.nominal_speed,
                   terminal=terminal)


def shift_trajectory(traj: GPTrajectory, t: float, current_state, goal,
                     n_supports: int) -> GPTrajectory:
    """Drop supports before ``t``, pin the first to ``current_state`` and resize.

    Missing supports are filled with the goal state (zero velocity).
    """
    k = int(math.floor((t - traj.t0) / traj.dt + 1e-9))
    k = min(max(k, 0), traj.n_intervals)
    states = traj.states[k:k + n_supports + 1].copy()
    states[0] = current_state
    if len(states) < n_supports + 1:
        hold = np.tile(np.asarray(goal, dtype=float), (n_supports + 1 - len(states), 1))
        states = np.vstack([states, hold])
    return GPTrajectory(states, t, traj.dt)


def hold_line_init(start, goal, arrival: int, n_supports: int, dt: float,
                   t0: float) -> GPTrajectory:
    """Straight line reaching ``goal`` at ``arrival``, then waiting there."""
    line = straight_line_init(start, goal[:2], arrival, dt, t0).states
    hold = np.tile(np.r_[goal[:2], 0.0, 0.0], (n_supports - arrival, 1))
    return GPTrajectory(np.vstack([line, hold]), t0, dt)


@dataclass
class CycleRecord:
    time: float
    decision: str
    cost: float
    valid: bool
    min_clearance: float


class RecedingHorizonPlanner:
    """Stateful plan/monitor/re-plan loop for one robot."""

    def __init__(self, goal, config: PlannerConfig = PlannerConfig()):
        goal = np.asarray(goal, dtype=float)
        self.goal = np.r_[goal[:2], 0.0, 0.0]
        self.config = config
        self.state: PlanState | None = None

    @property
    def terminal(self) -> bool:
        return self.state is not None and self.state.terminal

    def robot_state(self, t: float) -> np.ndarray:
        return self.state.trajectory.state_at(t, self.config.qc)

    def _clearance(self, traj, seq) -> float:
        out = math.inf
        for t, p in zip(traj.times, traj.positions):
            j = int(round((t - seq.t0) / seq.dt))
            if j >= 1:
                out = min(out, sample_field(seq.at_index(j), p)[0])
        return out

    def _optimize(self, graph, init, start) -> tuple[GPTrajectory, float]:
        """LM result with support 0 set exactly to the pinned ``start`` state."""
        init = GPTrajectory(np.vstack([start, init.states[1:]]), init.t0, init.dt)
        res = lm_optimize(graph, init, self.config.lm)
        states = res.trajectory.states.copy()
        states[0] = start
        return GPTrajectory(states, init.t0, init.dt), graph.cost(states)

    def cycle(self, t: float, current_state, seq: CompositeSequence) -> CycleRecord:
        """One monitor/re-optimize/decide step at time ``t``."""
        cfg = self.config
        current_state = np.asarray(current_state, dtype=float)
        if self.state is None:
            arrival, total = supports_for(np.linalg.norm(self.goal[:2] - current_state[:2]), cfg)
            graph = build_plan_graph(current_state, self.goal, seq, cfg, total, arrival)
            init = hold_line_init(current_state, self.goal, arrival, total, cfg.dt, t)
            traj, cost = self._optimize(graph, init, current_state)
            valid, _ = check_validity(traj, seq, cfg)
            self.state = PlanState(traj, cost, 0, self.goal, seq, arrival * cfg.dt,
                                   arrival=arrival)
            return CycleRecord(t, "init", cost, valid, self._clearance(traj, seq))

        state = step_execution(self.state, t, current_state[:2], cfg)
        if state.terminal:
            self.state = state
            return CycleRecord(t, "terminal", state.cost, True, math.inf)
        # the goal-hold start moves with the plan, so an unchanged world yields an unchanged
        # graph; the support count still follows the time-to-goal estimate
        arrival = max(1, state.arrival - state.execution_index)
        _, total = supports_for(state.time_to_goal * cfg.nominal_speed, cfg)
        total = max(total, arrival)
        shifted = shift_trajectory(state.trajectory, t, current_state, self.goal, total)
        graph = build_plan_graph(current_state, self.goal, seq, cfg, total, arrival)
        current_cost = graph.cost(shifted.states)
        current_valid, _ = check_validity(shifted, seq, cfg)
        reopt, reopt_cost = self._optimize(graph, shifted, current_state)
        reopt_valid, _ = check_validity(reopt, seq, cfg)
        decision = replan_decision(current_cost, reopt_cost, current_valid, reopt_valid, cfg.rho)
        if decision == KEEP:
            traj, cost, valid = shifted, current_cost, current_valid
        elif decision == ADOPT:
            traj, cost, valid = reopt, reopt_cost, reopt_valid
        else:
            init = hold_line_init(current_state, self.goal, arrival, total, cfg.dt, t)
            traj, cost = self._optimize(graph, init, current_state)
            valid, _ = check_validity(traj, seq, cfg)
            # recovery keeps whichever candidate is cheaper when neither is valid
            if not valid and reopt_cost < cost:
                traj, cost, valid = reopt, reopt_cost, reopt_valid
        self.state = PlanState(traj, cost, 0, self.goal, seq, state.time_to_goal,
                               arrival=arrival)
        return CycleRecord(t, decision, cost, valid, self._clearance(traj, seq))
