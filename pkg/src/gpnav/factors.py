"""Factor graph over CV-GP support states and a Levenberg-Marquardt solver.

Every factor exposes ``error(states)`` (whitened residual) and
``linearize(states)`` (whitened residual plus per-variable Jacobian blocks),
so that the total cost is ``0.5 * sum(|e|^2)``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import linalg

from .fields import DistanceField, sample_field
from .gp import STATE_DIM, GPTrajectory, cv_process_noise_inv, cv_transition

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# factor error functions (unwhitened residuals with Jacobians)

def prior_factor_error(x, target, sigma) -> tuple[np.ndarray, float]:
    """Residual ``x - target`` and cost ``0.5 r^T Sigma^-1 r``.

    ``sigma`` is a covariance: a scalar (isotropic) or a matrix.  A 2-vector
    target constrains the position only.
    """
    target = np.asarray(target, dtype=float)
    r = np.asarray(x, dtype=float)[: target.size] - target
    cov = np.atleast_2d(sigma) if np.ndim(sigma) else sigma * np.eye(r.size)
    return r, 0.5 * float(r @ np.linalg.solve(cov, r))


def obstacle_factor_error(state, f: DistanceField, epsilon: float):
    """Hinge ``epsilon - d`` on the field distance at the state's position.

    Returns ``(h, dh/dp, out_of_bounds)``.  Out-of-bounds positions count as
    fully in collision (``d = 0``) with a zero gradient.
    """
    d, grad, oob = sample_field(f, state[:2])
    if oob:
        return epsilon, np.zeros(2), True
    if d > epsilon:
        return 0.0, np.zeros(2), False
    return epsilon - d, -grad, False


def robot_factor_error(state, robot_pos, epsilon: float):
    """Hinge ``epsilon - |p - x_r|``; returns ``(h, dh/dp)``.

    At ``p == x_r`` the push direction is taken as +x.
    """
    diff = np.asarray(state[:2], dtype=float) - np.asarray(robot_pos, dtype=float)
    dist = math.hypot(diff[0], diff[1])
    if dist > epsilon:
        return 0.0, np.zeros(2)
    if dist == 0.0:
        return epsilon, np.array([-1.0, 0.0])
    return epsilon - dist, -diff / dist


# ---------------------------------------------------------------------------
# factors

class PriorFactor:
    """Gaussian prior on one state (full 4-vector or position only)."""

    def __init__(self, index, target, sigma, kind="start"):
        if kind not in ("start", "goal"):
            raise ValueError(f"unknown prior kind {kind!r}")
        self.kind = kind
        self.indices = (int(index),)
        self.target = np.asarray(target, dtype=float)
        self.sigma = sigma
        dim = self.target.size
        cov = np.atleast_2d(sigma) if np.ndim(sigma) else sigma * np.eye(dim)
        # whitening W with W^T W = Sigma^-1
        self._w = np.linalg.cholesky(np.linalg.inv(cov)).T
        self._jac = np.zeros((dim, STATE_DIM))
        self._jac[:, :dim] = self._w

    def error(self, states):
        x = states[self.indices[0]]
        return self._w @ (x[: self.target.size] - self.target)

    def linearize(self, states):
        return self.error(states), [(self.indices[0], self._jac)]


class GPFactor:
    kind = "gp"

    def __init__(self, index, dt, qc):
        self.indices = (int(index), int(index) + 1)
        self.dt = dt
        self.qc = qc
        self._phi = cv_transition(dt)
        self._w = np.linalg.cholesky(cv_process_noise_inv(dt, qc)).T
        self._j0 = -self._w @ self._phi
        self._j1 = self._w

    def error(self, states):
        i, j = self.indices
        return self._w @ (states[j] - self._phi @ states[i])

    def linearize(self, states):
        i, j = self.indices
        return self.error(states), [(i, self._j0), (j, self._j1)]


class ObstacleFactor:
    kind = "obstacle"

    def __init__(self, index, field: DistanceField, epsilon, sigma):
        self.indices = (int(index),)
        self.field = field
        self.epsilon = epsilon
        self.sigma = sigma
        self.out_of_bounds = False

    def error(self, states):
        h, _, oob = obstacle_factor_error(states[self.indices[0]], self.field, self.epsilon)
        self.out_of_bounds = oob
        return np.array([h / self.sigma])

    def linearize(self, states):
        h, dh, oob = obstacle_factor_error(states[self.indices[0]], self.field, self.epsilon)
        self.out_of_bounds = oob
        jac = np.zeros((1, STATE_DIM))
        jac[0, :2] = dh / self.sigma
        return np.array([h / self.sigma]), [(self.indices[0], jac)]


class RobotFactor:
    kind = "robot"

    def __init__(self, index, robot_pos, epsilon, sigma):
        self.indices = (int(index),)
        self.robot_pos = np.asarray(robot_pos, dtype=float)
        self.epsilon = epsilon
        self.sigma = sigma

    def error(self, states):
        h, _ = robot_factor_error(states[self.indices[0]], self.robot_pos, self.epsilon)
        return np.array([h / self.sigma])

    def linearize(self, states):
        h, dh = robot_factor_error(states[self.indices[0]], self.robot_pos, self.epsilon)
        jac = np.zeros((1, STATE_DIM))
        jac[0, :2] = dh / self.sigma
        return np.array([h / self.sigma]), [(self.indices[0], jac)]


@dataclass
class FactorGraph:
    n_states: int
    dt: float
    factors: list = field(default_factory=list)

    def add(self, factor):
        if any(not 0 <= i < self.n_states for i in factor.indices):
            raise IndexError(f"{factor.kind} factor indices {factor.indices} out of range")
        self.factors.append(factor)
        return factor

    def of_kind(self, kind):
        return [f for f in self.factors if f.kind == kind]

    def validate(self):
        starts = self.of_kind("start")
        if len(starts) != 1:
            raise ValueError(f"graph needs exactly one start prior, has {len(starts)}")
        touched = {i for f in self.factors for i in f.indices}
        missing = set(range(self.n_states)) - touched
        if missing:
            raise ValueError(f"support states {sorted(missing)} are not constrained")

    def cost(self, states) -> float:
        states = np.asarray(states, dtype=float).reshape(self.n_states, STATE_DIM)
        total = 0.0
        for f in self.factors:
            e = f.error(states)
            total += float(e @ e)
        return 0.5 * total

    def cost_by_kind(self, states) -> dict:
        states = np.asarray(states, dtype=float).reshape(self.n_states, STATE_DIM)
        out = {}
        for f in self.factors:
            e = f.error(states)
            out[f.kind] = out.get(f.kind, 0.0) + 0.5 * float(e @ e)
        return out


def build_gp_chain(graph: FactorGraph, qc: float):
    for i in range(graph.n_states - 1):
        graph.add(GPFactor(i, graph.dt, qc))


# ---------------------------------------------------------------------------
# linearization and optimization

@dataclass
class LinearSystem:
    """Gauss-Newton normal equations ``H dx = -g`` around a linearization point."""

    hessian: np.ndarray  # J^T J, block tridiagonal in 4x4 blocks
    gradient: np.ndarray  # J^T e
    cost: float

    def solve(self, damping: float = 0.0) -> np.ndarray:
        n = self.gradient.size
        bw = 2 * STATE_DIM - 1
        ab = np.zeros((bw + 1, n))
        h = self.hessian + damping * np.eye(n)
        for k in range(bw + 1):
            ab[bw - k, k:] = np.diagonal(h, k)
        return linalg.solveh_banded(ab, -self.gradient)


def linearize(graph: FactorGraph, trajectory) -> LinearSystem:
    states = trajectory.states if isinstance(trajectory, GPTrajectory) else trajectory
    states = np.asarray(states, dtype=float).reshape(graph.n_states, STATE_DIM)
    n = graph.n_states * STATE_DIM
    H = np.zeros((n, n))
    g = np.zeros(n)
    total = 0.0
    for f in graph.factors:
        e, blocks = f.linearize(states)
        total += float(e @ e)
        for a, ja in blocks:
            sa = slice(a * STATE_DIM, (a + 1) * STATE_DIM)
            g[sa] += ja.T @ e
            for b, jb in blocks:
                sb = slice(b * STATE_DIM, (b + 1) * STATE_DIM)
                H[sa, sb] += ja.T @ jb
    return LinearSystem(H, g, 0.5 * total)


@dataclass(frozen=True)
class LMConfig:
    initial_damping: float = 0.01
    max_iterations: int = 100
    relative_tolerance: float = 1e-6
    damping_up: float = 10.0
    damping_down: float = 0.1
    max_damping: float = 1e10
    min_damping: float = 1e-12
    step_tolerance: float = 1e-12

    def __post_init__(self):
        if min(self.initial_damping, self.max_iterations, self.relative_tolerance,
               self.damping_up, self.damping_down) <= 0:
            raise ValueError("LM settings must be positive")


@dataclass
class LMResult:
    trajectory: GPTrajectory
    cost_trace: list
    iterations: int
    reason: str

    @property
    def cost(self) -> float:
        return self.cost_trace[-1]


def lm_optimize(graph: FactorGraph, init: GPTrajectory, config: LMConfig = LMConfig()) -> LMResult:
    """Minimize the graph cost from ``init``.

    A damped step is accepted only if it lowers the cost; otherwise damping is
    multiplied by ``damping_up`` and the step retried.  The trace holds the
    initial cost followed by every accepted cost.
    """
    x = init.states.copy()
    cost = graph.cost(x)
    if not math.isfinite(cost):
        raise ValueError("invalid initialization: non-finite cost")
    trace = [cost]
    lam = config.initial_damping
    reason = "max_iterations"
    it = 0
    for it in range(1, config.max_iterations + 1):
        if cost == 0.0:
            reason = "zero_cost"
            it -= 1
            break
        system = linearize(graph, x)
        accepted = False
        while lam <= config.max_damping:
            try:
                dx = system.solve(lam).reshape(x.shape)
            except linalg.LinAlgError:
                lam *= config.damping_up
                continue
            x_new = x + dx
            new_cost = graph.cost(x_new)
            if math.isfinite(new_cost) and new_cost < cost:
                accepted = True
                lam = max(lam * config.damping_down, config.min_damping)
                break
            lam *= config.damping_up
        if not accepted:
            reason = "damping_overflow"
            it -= 1
            break
        rel = (cost - new_cost) / cost
        x, cost = x_new, new_cost
        trace.append(cost)
        if rel < config.relative_tolerance:
            reason = "relative_tolerance"
            break
        if np.max(np.abs(dx)) < config.step_tolerance:
            reason = "step_tolerance"
            break
    log.debug("LM stopped after %d iterations (%s), cost %.6g", it, reason, cost)
    return LMResult(GPTrajectory(x, init.t0, init.dt), trace, it, reason)


def export_cost_trace(result: LMResult, path) -> None:
    lines = ["iteration,cost"] + [f"{i},{c:.9g}" for i, c in enumerate(result.cost_trace)]
    Path(path).write_text("\n".join(lines) + "\n")
