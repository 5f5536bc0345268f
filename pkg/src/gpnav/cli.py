"""Command line entry point: ``gpnav {sim,eval,bench,goals,corpus}``."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields, replace
from pathlib import Path

from .fields import compute_edt, load_map, save_map
from .intent import discover_goals, load_goals, load_track, save_goals, save_track
from .planner import PlannerConfig
from .prediction import PredictionConfig
from .sim.bench import bench_composite, make_workload
from .sim.closed_loop import SIM_MODES, run_closed_loop, scenario_configs
from .sim.corpus import curved_corpus, cv_tracks
from .sim.evaluation import EVAL_METHODS, export_results, run_prediction_eval
from .sim.scenario import BUILTIN_SCENARIOS, ScenarioError, resolve_scenario

log = logging.getLogger("gpnav")

# flag name -> config field, for the scalar fields that can be overridden
_PLANNER_FLAGS = {"dt": float, "n": int, "robot_radius": float, "epsilon": float,
                  "sigma_obs": float, "qc": float, "rho": float, "nominal_speed": float}
_PREDICTION_FLAGS = {"qc": float, "dt": float, "sigma_obs": float, "epsilon": float,
                     "sigma_r": float, "epsilon_r": float, "lam": float, "n_window": int,
                     "v_thres": float, "p_min": float, "max_supports": int}


def _add_config_flags(parser, prefix: str, flags: dict, defaults):
    group = parser.add_argument_group(f"{prefix} parameters")
    base = {f.name: getattr(defaults, f.name) for f in fields(defaults)}
    for name, typ in flags.items():
        group.add_argument(f"--{prefix}-{name.replace('_', '-')}", dest=f"{prefix}_{name}",
                           type=typ, default=None, metavar=typ.__name__.upper(),
                           help=f"default {base[name]}")


def _overrides(args, prefix: str, flags: dict) -> dict:
    out = {}
    for name in flags:
        v = getattr(args, f"{prefix}_{name}")
        if v is not None:
            out[name] = v
    return out


def _floats(text: str) -> tuple:
    return tuple(float(x) for x in text.split(",") if x.strip())


def _ints(text: str) -> tuple:
    return tuple(int(x) for x in text.split(",") if x.strip())


def _collect_tracks(paths) -> list[Path]:
    files = []
    for p in map(Path, paths):
        files.extend(sorted(p.glob("*.csv")) if p.is_dir() else [p])
    return files


def cmd_sim(args) -> int:
    scenario = resolve_scenario(args.scenario)
    if args.duration is not None:
        scenario.duration = args.duration
    if args.noise_sigma is not None:
        scenario.noise_sigma = args.noise_sigma
    pcfg, qcfg = scenario_configs(scenario)
    pcfg = replace(pcfg, **_overrides(args, "planner", _PLANNER_FLAGS))
    qcfg = replace(qcfg, **_overrides(args, "pred", _PREDICTION_FLAGS))
    modes = SIM_MODES if args.mode == "all" else (args.mode,)
    out = Path(args.out)
    summary = ["mode,min_distance,collision_threshold,collided,reached_goal"]
    for mode in modes:
        simlog = run_closed_loop(scenario, mode, seed=args.seed, planner_config=pcfg,
                                 prediction_config=qcfg)
        simlog.write(out)
        summary.append(f"{mode},{simlog.min_distance:.6f},{simlog.collision_threshold:.6f},"
                       f"{int(simlog.collided)},{int(simlog.reached_goal)}")
        print(f"{scenario.name} {mode:>8}: min distance {simlog.min_distance:.3f} m, "
              f"collided {simlog.collided}, reached goal {simlog.reached_goal}")
    (out / "summary.csv").write_text("\n".join(summary) + "\n")
    return 0


def cmd_eval(args) -> int:
    cfg = replace(PredictionConfig(), **_overrides(args, "pred", _PREDICTION_FLAGS))
    if args.horizons:
        cfg = replace(cfg, horizons=_floats(args.horizons))
    if args.corpus:
        if args.corpus == "curved":
            grid, goals, tracks = curved_corpus(seed=args.seed)
        else:
            grid, goals, tracks = None, None, cv_tracks(seed=args.seed)
        env = compute_edt(grid) if grid is not None else None
    else:
        if not args.tracks:
            print("eval: give --tracks or --corpus", file=sys.stderr)
            return 2
        tracks = [load_track(p) for p in _collect_tracks(args.tracks)]
        env = compute_edt(load_map(args.map)) if args.map else None
        goals = load_goals(args.goals) if args.goals else None
    robot = load_track(args.robot_track) if args.robot_track else None
    methods = tuple(args.methods.split(",")) if args.methods else EVAL_METHODS
    report = run_prediction_eval(tracks, env, goals, cfg, methods, args.obs_len, args.stride,
                                 robot)
    export_results(report, args.out)
    print(report.table())
    print(f"{report.n_windows} windows from {report.n_tracks} tracks "
          f"({report.skipped} skipped)")
    return 0


def cmd_bench(args) -> int:
    sizes = _ints(args.sizes)
    report = bench_composite(sizes, args.n, args.obstacles, args.reps, args.seed)
    out = Path(args.out)
    export_results(report, out)
    # the workload is seeded and reproducible even though the timings are not
    for size in sizes:
        work = make_workload(size, args.n, args.obstacles, args.seed)
        (out / f"workload_{size}.csv").write_text(work.to_csv())
    print(report.to_csv(), end="")
    return 0


def cmd_goals(args) -> int:
    tracks = [load_track(p) for p in _collect_tracks(args.tracks)]
    if not tracks:
        print("goals: no track files found", file=sys.stderr)
        return 2
    goals = discover_goals(tracks, args.cell_size, args.v_thres)
    save_goals(goals, args.out)
    print(f"{len(goals)} goals written to {args.out}")
    return 0


def cmd_corpus(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.kind == "curved":
        grid, goals, tracks = curved_corpus(args.n_tracks, seed=args.seed)
        save_map(grid, out / "map.txt")
        save_goals(goals, out / "goals.txt")
    else:
        tracks = cv_tracks(args.n_tracks, seed=args.seed)
    (out / "tracks").mkdir(exist_ok=True)
    for i, tr in enumerate(tracks):
        save_track(tr, out / "tracks" / f"track_{i:03d}.csv")
    print(f"{len(tracks)} tracks written to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gpnav", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sim", help="closed-loop simulation of a scenario")
    p.add_argument("scenario", help=f"scenario file or one of: {', '.join(BUILTIN_SCENARIOS)}")
    p.add_argument("--mode", choices=SIM_MODES + ("all",), default="all")
    p.add_argument("--seed", type=int, default=None, help="overrides the scenario seed")
    p.add_argument("--out", default="sim_out")
    p.add_argument("--duration", type=float, default=None)
    p.add_argument("--noise-sigma", type=float, default=None,
                   help="std of perceived human positions (m)")
    _add_config_flags(p, "planner", _PLANNER_FLAGS, PlannerConfig())
    _add_config_flags(p, "pred", _PREDICTION_FLAGS, PredictionConfig())
    p.set_defaults(func=cmd_sim)

    p = sub.add_parser("eval", help="sliding-window ADE/FDE evaluation")
    p.add_argument("--tracks", nargs="*", help="track CSV files or directories")
    p.add_argument("--corpus", choices=("curved", "cv"), help="use a synthetic corpus instead")
    p.add_argument("--map", help="occupancy map file")
    p.add_argument("--goals", help="goal file (x y N_k per line)")
    p.add_argument("--robot-track", help="robot track CSV for the robot factor")
    p.add_argument("--horizons", help="comma separated seconds, e.g. 1.6,3.2,4.8,8.0")
    p.add_argument("--methods", help=f"comma separated subset of {','.join(EVAL_METHODS)}")
    p.add_argument("--obs-len", type=int, default=10, help="observed samples per window")
    p.add_argument("--stride", type=int, default=1, help="samples between windows")
    p.add_argument("--seed", type=int, default=0, help="seed of a synthetic corpus")
    p.add_argument("--out", default="eval_out")
    _add_config_flags(p, "pred", _PREDICTION_FLAGS, PredictionConfig())
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="composite fields versus full EDT recomputation")
    p.add_argument("--sizes", default="64,128,256")
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--obstacles", type=int, default=2)
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="bench_out")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("goals", help="discover goals from dwell sites in tracks")
    p.add_argument("tracks", nargs="+", help="track CSV files or directories")
    p.add_argument("--cell-size", type=float, default=0.5)
    p.add_argument("--v-thres", type=float, default=PredictionConfig().v_thres)
    p.add_argument("--out", default="goals.txt")
    p.set_defaults(func=cmd_goals)

    p = sub.add_parser("corpus", help="write a synthetic track corpus")
    p.add_argument("kind", choices=("curved", "cv"))
    p.add_argument("--n-tracks", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="corpus")
    p.set_defaults(func=cmd_corpus)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ScenarioError, ValueError, OSError) as err:
        print(f"gpnav {args.command}: error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
