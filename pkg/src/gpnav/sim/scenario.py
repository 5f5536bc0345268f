"""Scenario files: JSON describing the map, goals, scripted humans and the robot.

Paths to the map and goal files are resolved relative to the scenario file.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema

from ..fields import OccupancyGrid, compute_edt, load_map
from ..intent import GoalSet, load_goals, load_track
from .humans import RouteError, ScriptedHuman

_POINT = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}

SCHEMA = {
    "type": "object",
    "required": ["map", "humans", "robot"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "map": {"type": "string"},
        "goals": {"type": ["string", "null"]},
        "seed": {"type": "integer"},
        "duration": {"type": "number", "exclusiveMinimum": 0},
        "tick": {"type": "number", "exclusiveMinimum": 0},
        "noise_sigma": {"type": "number", "minimum": 0},
        "planner": {"type": "object"},
        "prediction": {"type": "object"},
        "robot": {
            "type": "object",
            "required": ["start", "goal"],
            "additionalProperties": False,
            "properties": {"start": _POINT, "goal": _POINT,
                           "radius": {"type": "number", "exclusiveMinimum": 0}},
        },
        "humans": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "properties": {
                    "name": {"type": "string"},
                    "start": _POINT,
                    "waypoints": {
                        "type": "array",
                        "items": {"type": "array", "items": {"type": "number"},
                                  "minItems": 2, "maxItems": 3},
                    },
                    "speed": {"type": "number", "exclusiveMinimum": 0},
                    "radius": {"type": "number", "exclusiveMinimum": 0},
                    "start_delay": {"type": "number", "minimum": 0},
                    "track": {"type": "string"},
                },
            },
        },
    },
}


class ScenarioError(ValueError):
    pass


@dataclass
class HumanSpec:
    name: str = "human"
    start: tuple = (0.0, 0.0)
    waypoints: list = field(default_factory=list)  # (x, y, dwell)
    speed: float = 1.2
    radius: float = 0.3
    start_delay: float = 0.0
    track: str | None = None


@dataclass
class RobotSpec:
    start: tuple
    goal: tuple
    radius: float = 0.3


@dataclass
class Scenario:
    map: str
    humans: list
    robot: RobotSpec
    name: str = "scenario"
    goals: str | None = None
    seed: int = 0
    duration: float = 20.0
    tick: float = 0.1
    noise_sigma: float = 0.0
    planner: dict = field(default_factory=dict)
    prediction: dict = field(default_factory=dict)
    base_dir: Path = field(default=Path("."), repr=False, compare=False)
    grid: OccupancyGrid | None = field(default=None, repr=False, compare=False)
    goal_set: GoalSet | None = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        d = {"name": self.name, "map": self.map, "goals": self.goals, "seed": self.seed,
             "duration": self.duration, "tick": self.tick, "noise_sigma": self.noise_sigma,
             "planner": dict(self.planner), "prediction": dict(self.prediction),
             "robot": {"start": list(self.robot.start), "goal": list(self.robot.goal),
                       "radius": self.robot.radius},
             "humans": []}
        for h in self.humans:
            hd = asdict(h)
            hd["start"] = list(h.start)
            hd["waypoints"] = [list(w) for w in h.waypoints]
            if hd["track"] is None:
                del hd["track"]
            d["humans"].append(hd)
        return d

    def build_humans(self) -> list[ScriptedHuman]:
        env = compute_edt(self.grid)
        out = []
        for h in self.humans:
            if h.track:
                tr = load_track(self.base_dir / h.track)
                out.append(ScriptedHuman.from_track(h.name, tr.t, tr.xy, h.radius))
            else:
                out.append(ScriptedHuman.from_waypoints(
                    h.name, env, h.start, h.waypoints, h.speed, h.radius, h.start_delay))
        return out


def _check_free(grid: OccupancyGrid, p, what: str):
    ix, iy = grid.geometry.world_to_cell(p)
    if not grid.geometry.contains_cell(ix, iy):
        raise ScenarioError(f"{what} {list(p)} lies outside the map")
    if grid.cells[iy, ix]:
        raise ScenarioError(f"{what} {list(p)} lies in an occupied cell")


def scenario_from_dict(data: dict, base_dir=".") -> Scenario:
    try:
        jsonschema.validate(data, SCHEMA)
    except jsonschema.ValidationError as err:
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ScenarioError(f"{where}: {err.message}") from None
    base_dir = Path(base_dir)
    humans = []
    for i, h in enumerate(data["humans"]):
        wps = [tuple(w) + (0.0,) * (3 - len(w)) for w in h.get("waypoints", [])]
        humans.append(HumanSpec(h.get("name", f"human{i}"), tuple(h.get("start", (0.0, 0.0))),
                                wps, h.get("speed", 1.2), h.get("radius", 0.3),
                                h.get("start_delay", 0.0), h.get("track")))
    r = data["robot"]
    sc = Scenario(map=data["map"], humans=humans,
                  robot=RobotSpec(tuple(r["start"]), tuple(r["goal"]), r.get("radius", 0.3)),
                  name=data.get("name", "scenario"), goals=data.get("goals"),
                  seed=data.get("seed", 0), duration=data.get("duration", 20.0),
                  tick=data.get("tick", 0.1), noise_sigma=data.get("noise_sigma", 0.0),
                  planner=data.get("planner", {}), prediction=data.get("prediction", {}),
                  base_dir=base_dir)
    map_path = base_dir / sc.map
    if not map_path.exists():
        raise ScenarioError(f"map: file not found: {map_path}")
    sc.grid = load_map(map_path)
    if sc.goals:
        goals_path = base_dir / sc.goals
        if not goals_path.exists():
            raise ScenarioError(f"goals: file not found: {goals_path}")
        sc.goal_set = load_goals(goals_path)
    _check_free(sc.grid, sc.robot.start, "robot start")
    _check_free(sc.grid, sc.robot.goal, "robot goal")
    for h in sc.humans:
        if h.track:
            if not (base_dir / h.track).exists():
                raise ScenarioError(f"humans/{h.name}/track: file not found")
            continue
        _check_free(sc.grid, h.start, f"{h.name} start")
        for w in h.waypoints:
            _check_free(sc.grid, w[:2], f"{h.name} waypoint")
    try:
        sc.build_humans()
    except RouteError as err:
        raise ScenarioError(f"unreachable waypoint: {err}") from None
    return sc


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise ScenarioError(f"scenario file not found: {path}") from None
    except json.JSONDecodeError as err:
        raise ScenarioError(f"{path}: invalid JSON: {err}") from None
    return scenario_from_dict(data, path.parent)


def save_scenario(scenario: Scenario, path) -> None:
    Path(path).write_text(json.dumps(scenario.to_dict(), indent=2, sort_keys=True) + "\n")


BUILTIN_SCENARIOS = ("change_of_places", "change_of_places_obstacle", "multi_goal",
                     "narrow_passage")


def builtin_scenario_path(name: str) -> Path:
    """Path of a scenario file shipped with the package."""
    if name not in BUILTIN_SCENARIOS:
        raise ScenarioError(f"unknown built-in scenario {name!r}; "
                            f"choose from {', '.join(BUILTIN_SCENARIOS)}")
    return Path(str(resources.files("gpnav") / "scenarios" / f"{name}.json"))


def resolve_scenario(name_or_path) -> Scenario:
    """Load a scenario file, or a built-in scenario by name."""
    if str(name_or_path) in BUILTIN_SCENARIOS:
        return load_scenario(builtin_scenario_path(str(name_or_path)))
    return load_scenario(name_or_path)
