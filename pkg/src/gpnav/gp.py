"""Constant-velocity (white-noise-on-acceleration) GP prior in the plane.

States are stacked 4-vectors ``[px, py, vx, vy]``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

STATE_DIM = 4
I2 = np.eye(2)


@dataclass(frozen=True)
class GPConfig:
    qc: float = 0.2
    dt: float = 0.5

    def __post_init__(self):
        if self.qc <= 0 or self.dt <= 0:
            raise ValueError("qc and dt must be positive")


@dataclass
class GPTrajectory:
    """Support states at ``t0 + i * dt`` for ``i = 0..N``."""

    states: np.ndarray  # (N + 1, 4)
    t0: float
    dt: float

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=float).reshape(-1, STATE_DIM)
        if len(self.states) < 2:
            raise ValueError("a trajectory needs at least two support states")

    @property
    def n_intervals(self) -> int:
        return len(self.states) - 1

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self.states))

    @property
    def t_end(self) -> float:
        return self.t0 + self.dt * self.n_intervals

    @property
    def positions(self) -> np.ndarray:
        return self.states[:, :2]

    def copy(self) -> "GPTrajectory":
        return GPTrajectory(self.states.copy(), self.t0, self.dt)

    def state_at(self, t: float, qc: float) -> np.ndarray:
        """GP-interpolated state; times outside the span clamp to the end states."""
        if t <= self.t0:
            return self.states[0].copy()
        if t >= self.t_end:
            return self.states[-1].copy()
        i = min(int((t - self.t0) // self.dt), self.n_intervals - 1)
        tau = min(max(t - (self.t0 + i * self.dt), 0.0), self.dt)
        return gp_interpolate(self.states[i], self.states[i + 1], tau, GPConfig(qc, self.dt))


def cv_transition(dt: float) -> np.ndarray:
    phi = np.eye(STATE_DIM)
    phi[:2, 2:] = dt * I2
    return phi


def cv_process_noise(dt: float, qc: float) -> np.ndarray:
    q = np.empty((STATE_DIM, STATE_DIM))
    q[:2, :2] = dt ** 3 / 3.0 * qc * I2
    q[:2, 2:] = q[2:, :2] = dt ** 2 / 2.0 * qc * I2
    q[2:, 2:] = dt * qc * I2
    return q


def cv_process_noise_inv(dt: float, qc: float) -> np.ndarray:
    """Closed-form inverse of ``cv_process_noise``."""
    qi = np.empty((STATE_DIM, STATE_DIM))
    qi[:2, :2] = 12.0 / dt ** 3 * I2
    qi[:2, 2:] = qi[2:, :2] = -6.0 / dt ** 2 * I2
    qi[2:, 2:] = 4.0 / dt * I2
    return qi / qc


def gp_prior_residual(x0, x1, phi) -> np.ndarray:
    return np.asarray(x1, dtype=float) - phi @ np.asarray(x0, dtype=float)


def gp_prior_cost(x0, x1, dt: float, qc: float) -> float:
    r = gp_prior_residual(x0, x1, cv_transition(dt))
    return 0.5 * float(r @ cv_process_noise_inv(dt, qc) @ r)


def gp_interpolate(x0, x1, tau: float, config: GPConfig) -> np.ndarray:
    """Posterior mean of the state at ``tau`` after ``x0`` given both supports."""
    dt = config.dt
    if not -1e-12 <= tau <= dt + 1e-12:
        raise ValueError(f"tau={tau} outside [0, {dt}]")
    tau = min(max(tau, 0.0), dt)
    if tau == 0.0:
        return np.array(x0, dtype=float)
    if tau == dt:
        return np.array(x1, dtype=float)
    psi = (cv_process_noise(tau, config.qc) @ cv_transition(dt - tau).T
           @ cv_process_noise_inv(dt, config.qc))
    lam = cv_transition(tau) - psi @ cv_transition(dt)
    return lam @ np.asarray(x0, dtype=float) + psi @ np.asarray(x1, dtype=float)


def straight_line_init(start, goal, n: int, dt: float, t0: float = 0.0) -> GPTrajectory:
    """Constant-velocity line from ``start`` (a state or a position) to ``goal`` in ``n`` steps."""
    if n < 1:
        raise ValueError("n must be >= 1")
    p0 = np.asarray(start, dtype=float)[:2]
    g = np.asarray(goal, dtype=float)[:2]
    s = np.linspace(0.0, 1.0, n + 1)[:, None]
    states = np.zeros((n + 1, STATE_DIM))
    states[:, :2] = p0 + s * (g - p0)
    states[:, 2:] = (g - p0) / (n * dt)
    return GPTrajectory(states, t0, dt)


def constant_velocity_rollout(state, n: int, dt: float, t0: float = 0.0) -> GPTrajectory:
    state = np.asarray(state, dtype=float)
    k = np.arange(n + 1)[:, None] * dt
    states = np.zeros((n + 1, STATE_DIM))
    states[:, :2] = state[:2] + k * state[2:]
    states[:, 2:] = state[2:]
    return GPTrajectory(states, t0, dt)
