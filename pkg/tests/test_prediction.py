import math

import numpy as np
import pytest

from gpnav.fields import GridGeometry, OccupancyGrid, compute_edt, sample_field
from gpnav.intent import GoalSet, TrackHistory
from gpnav.prediction import (PredictionConfig, ablation_config, ade, current_motion,
                              cvm_predict, errors_against, estimate_time_to_goal, fde,
                              lvm_predict, predict_trajectory)


def walk(p0, v, n=12, dt=0.1, t0=0.0):
    t = t0 + dt * np.arange(n)
    return TrackHistory(t, np.asarray(p0, float) + (t - t0)[:, None] * np.asarray(v, float))


def open_env(size=(200, 120), origin=(-2.0, -6.0)):
    geom = GridGeometry(origin, 0.1, *size)
    cells = np.zeros(geom.shape, bool)
    cells[0, :] = cells[-1, :] = cells[:, 0] = cells[:, -1] = True
    return OccupancyGrid(geom, cells)


class TestBaselines:
    def test_cvm_example(self):
        hist = TrackHistory([0.0, 0.5], [[-0.5, 0.0], [0.0, 0.0]])
        res = cvm_predict(hist, 2.0, 0.5)
        assert np.allclose(res.trajectory.positions[1:], [[0.5, 0], [1, 0], [1.5, 0], [2, 0]])
        assert res.mode == "cvm"

    def test_cvm_stationary_cases(self):
        still = cvm_predict(TrackHistory([0, 1], [[1, 1], [1, 1]]), 2.0, 0.5)
        assert np.allclose(still.trajectory.positions, [1, 1])
        single = cvm_predict(TrackHistory([0.0], [[2, 3]]), 2.0, 0.5)
        assert np.allclose(single.positions_at([0.5, 1.7, 9.0]), [2, 3])

    def test_cvm_rotation_equivariance(self, rng):
        xy = np.cumsum(rng.normal(size=(6, 2)), axis=0)
        t = np.arange(6) * 0.4
        c, s = math.cos(0.7), math.sin(0.7)
        R = np.array([[c, -s], [s, c]])
        a = cvm_predict(TrackHistory(t, xy), 3.0, 0.5).trajectory.positions
        b = cvm_predict(TrackHistory(t, xy @ R.T), 3.0, 0.5).trajectory.positions
        assert np.allclose(a @ R.T, b)

    def test_lvm_example(self):
        res = lvm_predict(TrackHistory([0, 1], [[0, 0], [2, 0]]), 2.0, 0.5)
        assert np.allclose(res.position_at(2.0), [4, 0])

    def test_lvm_equals_cvm_on_cv_history(self):
        hist = walk([1, 2], [0.7, -0.4])
        a = lvm_predict(hist, 4.0, 0.5).trajectory.states
        b = cvm_predict(hist, 4.0, 0.5).trajectory.states
        assert np.allclose(a, b)

    def test_lvm_accelerating_offset(self):
        hist = TrackHistory([0, 1, 2], [[0, 0], [1, 0], [3, 0]])
        # average velocity 1.5, last velocity 2: after 2 s the gap is 2 * 0.5
        gap = (cvm_predict(hist, 2.0, 0.5).position_at(4.0)
               - lvm_predict(hist, 2.0, 0.5).position_at(4.0))
        assert np.allclose(gap, [1.0, 0.0])

    def test_lvm_degenerate(self):
        res = lvm_predict(TrackHistory([0.0], [[1, 1]]), 1.0, 0.5)
        assert np.allclose(res.trajectory.states[:, 2:], 0)


class TestTimeToGoal:
    def test_examples(self):
        assert estimate_time_to_goal([0, 0], [4, 0], 1.0) == pytest.approx(4.0)
        assert estimate_time_to_goal([2, 2], [2, 2], 1.0) == 0.0
        assert estimate_time_to_goal([0, 0], [4, 0], 0.1) is None
        with pytest.raises(ValueError):
            estimate_time_to_goal([0, 0], [1, 0], -1.0)

    def test_current_motion_window(self):
        hist = TrackHistory(np.arange(5) * 0.5, [[0, 0], [0, 0], [0, 0], [1, 0], [2, 0]])
        v, speed = current_motion(hist, 3)
        assert np.allclose(v, [2.0, 0]) and speed == pytest.approx(2.0)
        v, speed = current_motion(hist, 5)
        assert np.allclose(v, [1.0, 0]) and speed == pytest.approx(1.0)


class TestConfig:
    @pytest.mark.parametrize("kw", [dict(horizons=(3.2, 1.6)), dict(horizons=(0.0, 1.0)),
                                    dict(horizons=()), dict(p_min=1.0), dict(p_min=-0.1)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            PredictionConfig(**kw)

    def test_defaults(self):
        c = PredictionConfig()
        assert c.horizons == (1.6, 3.2, 4.8, 8.0)
        assert (c.qc, c.sigma_obs, c.epsilon, c.epsilon_r) == (0.2, 0.1, 0.4, 0.8)
        assert c.intent.lam == 1.0 and c.intent.v_thres == 0.3

    def test_ablations(self):
        c = PredictionConfig()
        assert not ablation_config(c, "no-intent").use_intent
        assert not ablation_config(c, "no-robot-factor").use_robot_factor
        with pytest.raises(ValueError):
            ablation_config(c, "no-gp")


class TestPredict:
    def test_straight_walk_ties_cvm(self):
        v = np.array([1.2, 0.0])
        hist = walk([0.0, 0.0], v, n=10, dt=0.4)
        goal = hist.xy[-1] + v * 10.0  # arrival after the longest horizon
        goals = GoalSet.uniform([goal, [0.0, 20.0]])
        res = predict_trajectory(hist, goals, None, None, PredictionConfig())
        assert res.mode == "proposed" and np.allclose(res.goal, goal)
        cv = cvm_predict(hist, 8.0, 0.5)
        for h in (1.6, 3.2, 4.8, 8.0):
            t = hist.t[-1] + h
            assert np.linalg.norm(res.position_at(t) - cv.position_at(t)) < 1e-3

    def test_padding_holds_goal(self):
        hist = walk([0.0, 0.0], [1.0, 0.0], n=10, dt=0.4)
        goal = np.array([6.6, 0.3])
        res = predict_trajectory(hist, GoalSet.uniform([goal]), None)
        assert res.trajectory.t_end - hist.t[-1] >= 8.0 - 1e-9
        arrival = hist.t[-1] + res.duration
        assert np.allclose(res.position_at(arrival), goal, atol=1e-4)
        for t in arrival + np.array([1e-9, 0.01, 4.3, 5.0, 20.0]):
            assert np.array_equal(res.position_at(t), goal)
        assert np.allclose(res.trajectory.positions[0], hist.xy[-1], atol=1e-3)

    def test_goal_behind_obstacle(self):
        grid = open_env().with_discs([(4.0, 0.0)], 0.8)
        env = compute_edt(grid)
        hist = walk([-1.0, 0.05], [1.0, 0.0], n=10, dt=0.2)
        res = predict_trajectory(hist, GoalSet.uniform([[9.0, 0.0]]), env)
        assert res.mode == "proposed"
        assert all(sample_field(env, p)[0] > 0 for p in res.trajectory.positions)

    def test_robot_factor_bends_path(self):
        hist = walk([0.0, 0.0], [1.0, 0.0], n=10, dt=0.2)
        goals = GoalSet.uniform([[8.0, 0.0]])
        robot = np.array([4.0, 0.1])
        cfg = PredictionConfig()
        with_r = predict_trajectory(hist, goals, None, robot, cfg)
        without = predict_trajectory(hist, goals, None, robot,
                                     ablation_config(cfg, "no-robot-factor"))
        ts = np.linspace(hist.t[-1], hist.t[-1] + with_r.duration, 200)
        d_with = np.min(np.linalg.norm(with_r.positions_at(ts) - robot, axis=1))
        d_without = np.min(np.linalg.norm(without.positions_at(ts) - robot, axis=1))
        assert d_with > d_without

    def test_stationary_agent(self):
        hist = walk([1.0, 1.0], [0.1, 0.0], n=12)
        res = predict_trajectory(hist, GoalSet.uniform([[5, 5]]), None)
        assert res.mode == "stationary"
        assert np.allclose(res.positions_at([hist.t[-1] + 1, hist.t[-1] + 8]), hist.xy[-1])

    def test_low_probability_drops_goal(self):
        hist = walk([0.0, 0.0], [1.0, 0.0], n=10, dt=0.2)
        goals = GoalSet.uniform([[0.0, 10.0], [0.0, -10.0], [-10.0, 0.1], [-10.0, -0.1]])
        res = predict_trajectory(hist, goals, None, None, PredictionConfig(p_min=0.5))
        assert res.mode == "proposed-no-goal" and res.goal is None
        cv = cvm_predict(hist, 8.0, 0.5)
        assert np.allclose(res.position_at(hist.t[-1] + 3.0), cv.position_at(hist.t[-1] + 3.0),
                           atol=1e-6)

    def test_no_intent_ignores_goals(self):
        hist = walk([0.0, 0.0], [1.0, 0.0], n=10, dt=0.2)
        cfg = ablation_config(PredictionConfig(), "no-intent")
        res = predict_trajectory(hist, GoalSet.uniform([[3.0, 3.0]]), None, None, cfg)
        assert res.mode == "proposed-no-goal"

    def test_at_goal(self):
        hist = walk([0.0, 0.0], [1.0, 0.0], n=10, dt=0.2)
        goal = hist.xy[-1].copy()
        res = predict_trajectory(hist, GoalSet.uniform([goal, [0, 50]]),
                                 None, None, PredictionConfig(p_min=0.0))
        assert res.duration == 0.0 or res.goal is None or np.allclose(res.position_at(5.0), goal)

    def test_deterministic(self):
        env = compute_edt(open_env().with_discs([(4.0, 0.0)], 0.8))
        hist = walk([-1.0, 0.05], [1.0, 0.0], n=10, dt=0.2)
        goals = GoalSet.uniform([[9.0, 0.0], [3.0, 5.0]])
        a = predict_trajectory(hist, goals, env, [6.0, 0.5])
        b = predict_trajectory(hist, goals, env, [6.0, 0.5])
        assert np.array_equal(a.trajectory.states, b.trajectory.states)


class TestMetrics:
    def test_identical(self):
        p = np.random.default_rng(0).normal(size=(5, 2))
        assert ade(p, p) == 0 and fde(p, p) == 0

    def test_constant_offset(self):
        p = np.zeros((4, 2))
        assert ade(p, p + [0, 1]) == pytest.approx(1) and fde(p, p + [0, 1]) == pytest.approx(1)

    def test_worked_examples(self):
        assert ade([[0, 0], [1, 0]], [[0, 1], [1, 1]]) == pytest.approx(1.0)
        assert fde([[0, 0], [1, 0]], [[0, 1], [1, 1]]) == pytest.approx(1.0)
        assert ade([[0, 0], [2, 0]], [[0, 0], [1, 0]]) == pytest.approx(0.5)
        assert fde([[0, 0], [2, 0]], [[0, 0], [1, 0]]) == pytest.approx(1.0)

    def test_bounds(self, rng):
        a, b = rng.normal(size=(7, 2)), rng.normal(size=(7, 2))
        d = np.linalg.norm(a - b, axis=1)
        assert ade(a, b) <= d.max() and fde(a, b) == pytest.approx(d[-1])

    def test_errors(self):
        with pytest.raises(ValueError):
            ade(np.zeros((0, 2)), np.zeros((0, 2)))
        with pytest.raises(ValueError):
            fde(np.zeros((2, 2)), np.zeros((3, 2)))

    def test_against_truth_track(self):
        hist = TrackHistory([0.0, 0.5], [[-0.5, 0.0], [0.0, 0.0]])
        res = cvm_predict(hist, 2.0, 0.5)
        truth = TrackHistory([1.0, 1.5], [[0.5, 1.0], [1.0, 1.0]])
        a, f = errors_against(res, truth)
        assert a == pytest.approx(1.0) and f == pytest.approx(1.0)
