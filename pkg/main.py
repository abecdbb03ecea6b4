#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
HierNav - Main Application
--------------------------
Command-line entry point: train behaviors, fit dynamics models, explore and
navigate mazes, run benchmarks and export plots
"""

import argparse
import json
import logging
import os
import sys
import traceback
from dataclasses import replace
from pathlib import Path

from dotenv import load_dotenv

# Load environment variables early
load_dotenv()


def global_exception_handler(exctype, value, tb):
    """Global exception handler to log unhandled exceptions"""
    logger = logging.getLogger("hiernav")
    logger.critical(f"Unhandled exception: {value}")
    logger.critical("".join(traceback.format_exception(exctype, value, tb)))
    sys.__excepthook__(exctype, value, tb)


sys.excepthook = global_exception_handler

import numpy as np  # noqa: E402
from sqlalchemy.exc import SQLAlchemyError  # noqa: E402

from core.behavior import (  # noqa: E402
    BehaviorLibrary,
    build_library,
    collect_rollouts,
    default_specs,
    evaluate_behavior,
)
from core.benchmark import (  # noqa: E402
    run_benchmark,
    setup_navigator,
    write_metrics_csv,
)
from core.config import PROFILES, load_config  # noqa: E402
from core.constants import (  # noqa: E402
    EXIT_CONFIG,
    EXIT_EXPORT,
    EXIT_FAILURE,
    EXIT_MISSING_ARTIFACTS,
    EXIT_OK,
    EXIT_PLANNING,
    GRAPH_SNAPSHOT_FILE,
    METRICS_FILE,
    MODE_EXPLORE,
    MODE_FREE,
    MODE_GOAL,
    MODE_WAYPOINTS,
    OUTCOME_GOAL_REACHED,
    REFERENCE_NORMALIZED_DISTANCE,
    RUN_INFO_FILE,
    SEED_ENV_VAR,
    TITLE,
    TRACE_FILE,
)
from core.crawler import make_env, write_trace_csv  # noqa: E402
from core.dynamics import fit_library_models, load_models, save_models  # noqa: E402
from core.errors import (  # noqa: E402
    ArtifactError,
    ConfigError,
    ExportError,
    MazeParseError,
    PlanningError,
)
from core.maze import bundled_maze, load_maze_file  # noqa: E402
from core.navigator import Navigator, RunConfig  # noqa: E402
from db.queries import save_benchmark_session  # noqa: E402
from db.session import init_db  # noqa: E402
from graphics.renderer import export_plots  # noqa: E402
from utils.helper import format_mean_std, spawn_rngs  # noqa: E402
from utils.logger import get_logger, log_exception, setup_logger  # noqa: E402

DEFAULT_LIBRARY_DIR = Path("artifacts") / "library"
DEFAULT_RUNS_DIR = Path("runs")

logger = get_logger("hiernav.cli")


def check_environment():
    """Check and report the environment configuration"""
    if sys.version_info < (3, 9):
        logger.error(f"Python 3.9+ required, but found {sys.version}")
        return False

    if os.getenv("DATABASE_URL"):
        logger.info("Found DATABASE_URL environment variable")
    else:
        logger.debug("DATABASE_URL not found, results go to a SQLite file in the output directory")

    logger.debug(f"Log level: {os.getenv('LOG_LEVEL', 'INFO')}")
    threads = os.getenv("HIERNAV_THREADS")
    if threads:
        logger.debug(f"Worker pool capped at {threads} threads")
    return True


def exit_code_for(error):
    """Map a failure class to the process exit code"""
    if isinstance(error, (ConfigError, MazeParseError)):
        return EXIT_CONFIG
    if isinstance(error, ArtifactError):
        return EXIT_MISSING_ARTIFACTS
    if isinstance(error, PlanningError):
        return EXIT_PLANNING
    if isinstance(error, ExportError):
        return EXIT_EXPORT
    return EXIT_FAILURE


def resolve_seed(args, config):
    if args.seed is not None:
        return args.seed
    env_seed = os.getenv(SEED_ENV_VAR)
    if env_seed:
        try:
            return int(env_seed)
        except ValueError:
            raise ConfigError(f"{SEED_ENV_VAR} must be an integer, got {env_seed!r}", key=SEED_ENV_VAR) from None
    return config.run.seed


def resolve_maze(name_or_path):
    """A maze file path, or the name of a bundled maze"""
    path = Path(name_or_path)
    if path.suffix == ".txt" or path.exists():
        if not path.exists():
            raise ConfigError(f"maze file not found: {path}", key="maze")
        return load_maze_file(path), str(path.resolve())
    try:
        return bundled_maze(name_or_path), None
    except FileNotFoundError as e:
        raise ConfigError(str(e), key="maze") from None


def read_waypoints(path, return_to_first=False):
    """One "x y" pair per line; blank lines and # comments are skipped"""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"waypoints file not found: {path}", key="waypoints")
    targets = []
    for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace(",", " ").split()
        if len(parts) != 2:
            raise ConfigError(f"{path}:{line_no}: expected 'x y', got {line!r}", key="waypoints")
        try:
            targets.append((float(parts[0]), float(parts[1])))
        except ValueError:
            raise ConfigError(f"{path}:{line_no}: not a number in {line!r}", key="waypoints") from None
    if not targets:
        raise ConfigError(f"{path} lists no waypoints", key="waypoints")
    if return_to_first:
        targets.append(targets[0])
    return targets


class SnapshotWriter:
    """Writes graph_<k>.json whenever the graph statistics change"""

    def __init__(self, directory, maze_name):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.maze_name = maze_name
        self.index = 0
        self._last = None

    def __call__(self, graph, step, force=False):
        counts = graph.counts()
        if counts == self._last and not force:
            return None
        self._last = counts
        path = self.directory / GRAPH_SNAPSHOT_FILE.format(index=self.index)
        document = {"index": self.index, "step": int(step), "maze": self.maze_name, "graph": graph.snapshot()}
        path.write_text(json.dumps(document), encoding="utf-8")
        self.index += 1
        return path


def load_stack(args, config):
    """
    Load the behavior library and its dynamics models

    Returns:
        tuple: (library, models, config with the env section matched to the library)
    """
    library = BehaviorLibrary.load(args.library)
    models = load_models(args.models or args.library, library)
    compass = library.env_info.get("compass", config.env.compass)
    if library.body != config.env.body or compass != config.env.compass:
        logger.info(f"Using the library's body: {library.body} (compass={compass})")
    config = replace(config, env=replace(config.env, body=library.body, compass=compass))
    return library, models, config


def cmd_train_behaviors(args, config):
    seed = resolve_seed(args, config)
    out = Path(args.out or DEFAULT_LIBRARY_DIR)
    scripted = args.scripted or config.behavior.scripted
    specs = default_specs(config.behavior.step_magnitude)

    def env_factory(rng):
        return make_env(config.env, maze=None, rng=rng)

    logger.info(
        f"{'Scripting' if scripted else 'Training'} {len(specs)} {config.env.body} behaviors "
        f"({config.behavior.total_steps} steps each)"
    )
    library = build_library(
        env_factory,
        specs,
        config.behavior,
        seed=seed,
        scripted=scripted,
        tail_fraction=config.dynamics.tail_fraction,
    )

    rollout_rngs = spawn_rngs(seed + 1, len(library))
    eval_rngs = spawn_rngs(seed + 2, len(library))
    for behavior, rollout_rng, eval_rng in zip(library, rollout_rngs, eval_rngs):
        if scripted:
            library.replay[behavior.id] = collect_rollouts(
                env_factory(rollout_rng),
                behavior,
                config.dynamics.rollout_steps,
                config.behavior.max_episode_length,
            )
        evaluation = evaluate_behavior(
            env_factory(eval_rng), behavior, config.behavior.eval_rollouts, config.behavior.eval_steps
        )
        print(f"{evaluation} (v = {behavior.spec.v})")

    library.save(out)
    print(f"Behavior library written to {out}")
    return EXIT_OK


def cmd_fit_dynamics(args, config):
    seed = resolve_seed(args, config)
    library = BehaviorLibrary.load(args.library)
    models, reports = fit_library_models(library, config.dynamics, seed=seed)
    out = save_models(models, reports, args.out or args.library)
    for report in reports:
        print(
            f"behavior {report.behavior_id}: {report.pairs} pairs, "
            f"holdout error {report.holdout_error:.4f} over {report.holdout_pairs} pairs"
        )
    print(f"Dynamics models written to {out}")
    return EXIT_OK


def _write_run_info(out, info):
    (out / RUN_INFO_FILE).write_text(json.dumps(info, indent=2, default=str), encoding="utf-8")


def _run_free(args, config, library, models, seed, out):
    """Free-space task: aim straight at random goals in an open arena"""
    rows, distances = [], []
    rngs = spawn_rngs(seed, args.count)
    extent = config.run.free_space_extent
    for episode, rng in enumerate(rngs):
        env = make_env(config.env, maze=None, rng=rng)
        env.reset((0.0, 0.0, rng.uniform(-np.pi, np.pi)))
        navigator = Navigator(
            env,
            None,
            library,
            models,
            config.mpc,
            RunConfig.from_settings(config.run, mode=MODE_FREE, seed=seed + episode),
            rng=rng,
        )
        goal = rng.uniform(-extent, extent, size=2)
        result = navigator.run_free_space(goal, steps=config.run.free_space_steps)
        distances.append(result.normalized_distance)
        rows.append(
            {
                "run_id": episode,
                "seed": seed + episode,
                "maze": "open",
                "mode": MODE_FREE,
                "total_steps": len(result.trace),
                "success": result.final_distance < config.run.success_threshold,
                "replans": 0,
                "subgoal_timeouts": 0,
            }
        )
        logger.info(f"free episode {episode}: goal {np.round(goal, 2)}, normalized distance {result.normalized_distance:.3f}")

    write_metrics_csv(rows, out / METRICS_FILE)
    logger.info(f"Legged-robot reference normalized distance: {REFERENCE_NORMALIZED_DISTANCE}")
    print(f"Normalized distance to goal: {format_mean_std(distances)}")
    _write_run_info(out, {"mode": MODE_FREE, "seed": seed, "episodes": args.count, "normalized_distance": distances})
    return EXIT_OK


def _run_benchmark(args, config, library, models, maze, seed, out):
    outcomes, summary = run_benchmark(maze, library, models, config, runs=args.count, base_seed=seed)
    rows = [row for outcome in outcomes for row in outcome.metric_rows()]
    write_metrics_csv(rows, out / METRICS_FILE)
    print(summary.row())
    print(f"goal success {summary.goal_successes}/{summary.goal_episodes}")

    try:
        init_db(directory=out)
        save_benchmark_session(summary, outcomes, library.body, base_seed=seed, config=config.to_dict())
    except SQLAlchemyError as e:
        logger.warning(f"Could not store the benchmark in the results database: {e}")

    _write_run_info(
        out,
        {"mode": "benchmark", "maze": maze.name, "seed": seed, "runs": summary.runs, "row": summary.row()},
    )
    return EXIT_OK


def cmd_run(args, config):
    seed = resolve_seed(args, config)
    library, models, config = load_stack(args, config)

    if args.mode == MODE_FREE:
        out = Path(args.out or DEFAULT_RUNS_DIR / f"free_{seed}")
        out.mkdir(parents=True, exist_ok=True)
        return _run_free(args, config, library, models, seed, out)

    maze, maze_file = resolve_maze(args.maze)
    out = Path(args.out or DEFAULT_RUNS_DIR / f"{maze.name}_{args.mode}_{seed}")
    out.mkdir(parents=True, exist_ok=True)
    if args.mode == "benchmark":
        return _run_benchmark(args, config, library, models, maze, seed, out)

    writer = SnapshotWriter(out, maze.name)
    navigator, _ = setup_navigator(maze, library, models, config, seed, args.mode, writer)
    info = {"mode": args.mode, "maze": maze.name, "maze_file": maze_file, "seed": seed, "body": library.body}
    rows = []

    def row(mode, steps, success, replans, timeouts):
        rows.append(
            {
                "run_id": len(rows),
                "seed": seed,
                "maze": maze.name,
                "mode": mode,
                "total_steps": steps,
                "success": success,
                "replans": replans,
                "subgoal_timeouts": timeouts,
            }
        )

    try:
        explore = navigator.run_explore()
        row(MODE_EXPLORE, explore.steps, explore.done, explore.replans, explore.subgoal_timeouts)
        info["explore"] = {"steps": explore.steps, "done": explore.done, **navigator.graph.counts()}
        print(f"Explored {maze.name} in {explore.steps} steps ({explore.visited} nodes visited)")

        if args.mode == MODE_GOAL:
            result = navigator.run_reach_goal((args.x, args.y))
            row(MODE_GOAL, result.steps, result.success, result.replans, result.subgoal_timeouts)
            info["goal"] = {"target": [args.x, args.y], "steps": result.steps, "outcome": result.outcome}
            if result.outcome != OUTCOME_GOAL_REACHED:
                writer(navigator.graph, navigator.total_steps, force=True)
                raise PlanningError(f"goal ({args.x}, {args.y}) not reached: {result.outcome}")
            print(f"Goal reached in {result.steps} steps")

        elif args.mode == MODE_WAYPOINTS:
            targets = read_waypoints(args.file, args.return_to_first)
            result = navigator.run_waypoints(targets)
            for leg in result.legs:
                row(MODE_GOAL, leg.steps, leg.success, leg.replans, leg.subgoal_timeouts)
            info["waypoints"] = {"targets": targets, "reached": result.reached, "steps": result.steps}
            print(f"Reached {result.reached}/{len(targets)} waypoints in {result.steps} steps")
            if result.reached < len(targets):
                writer(navigator.graph, navigator.total_steps, force=True)
                raise PlanningError(f"waypoint {result.reached + 1} not reached")
    finally:
        writer(navigator.graph, navigator.total_steps)
        write_trace_csv(navigator.history.records, out / TRACE_FILE)
        write_metrics_csv(rows, out / METRICS_FILE)
        _write_run_info(out, info)
        logger.info(f"Run artifacts written to {out}")

    return EXIT_OK


def cmd_export_plots(args, config):
    out = Path(args.out or Path(args.run_dir) / "plots")
    summary = export_plots(args.run_dir, out, gif=not args.no_gif)
    print(f"Wrote {len(summary.svg_files)} SVG maps to {out}")
    if summary.wall_crossings:
        print(f"warning: {len(summary.wall_crossings)} feasible edges cross a wall")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="hiernav", description=f"{TITLE}: hierarchical maze navigation")
    parser.add_argument("--config", help="YAML or JSON file overlaid on the profile")
    parser.add_argument("--profile", choices=PROFILES, default="desk", help="hyperparameter profile")
    parser.add_argument("--seed", type=int, default=None, help="root seed")
    parser.add_argument("--out", help="output directory")
    commands = parser.add_subparsers(dest="command", required=True)

    train = commands.add_parser("train-behaviors", help="train (or script) the behavior library")
    train.add_argument("--scripted", action="store_true", help="use scripted controllers instead of learning")
    train.set_defaults(handler=cmd_train_behaviors)

    fit = commands.add_parser("fit-dynamics", help="fit one dynamics model per behavior")
    fit.add_argument("library", help="behavior library directory")
    fit.set_defaults(handler=cmd_fit_dynamics)

    run = commands.add_parser("run", help="explore and navigate")
    run.add_argument("--library", default=str(DEFAULT_LIBRARY_DIR), help="behavior library directory")
    run.add_argument("--models", help="dynamics model directory (defaults to the library)")
    modes = run.add_subparsers(dest="mode", required=True)

    explore = modes.add_parser(MODE_EXPLORE, help="explore until no new node is reachable")
    explore.add_argument("maze", help="bundled maze name or maze file")

    goal = modes.add_parser(MODE_GOAL, help="explore, then reach the goal at X Y")
    goal.add_argument("maze")
    goal.add_argument("x", type=float)
    goal.add_argument("y", type=float)

    waypoints = modes.add_parser(MODE_WAYPOINTS, help="explore, then visit waypoints in order")
    waypoints.add_argument("maze")
    waypoints.add_argument("file", help="one 'x y' pair per line")
    waypoints.add_argument("--return", dest="return_to_first", action="store_true", help="finish at the first waypoint")

    bench = modes.add_parser("benchmark", help="N seeded explore + random-goal repetitions")
    bench.add_argument("maze")
    bench.add_argument("count", type=int)

    free = modes.add_parser(MODE_FREE, help="N free-space episodes toward random goals")
    free.add_argument("count", type=int)
    run.set_defaults(handler=cmd_run)

    export = commands.add_parser("export-plots", help="SVG maps, coverage table and GIF of a run")
    export.add_argument("run_dir")
    export.add_argument("--no-gif", action="store_true")
    export.set_defaults(handler=cmd_export_plots)
    return parser


def main(argv=None):
    """
    Parse arguments, run one command and return its exit code

    Args:
        argv (list[str], optional): Arguments without the program name

    Returns:
        int: 0 on success, 2 config, 3 missing artifacts, 4 planning, 5 export, 1 otherwise
    """
    args = build_parser().parse_args(argv)
    setup_logger(
        console_level=getattr(logging, os.getenv("LOG_LEVEL", "INFO").upper(), logging.INFO),
        log_dir=os.getenv("HIERNAV_LOG_DIR", "logs"),
    )
    logger.debug(f"{TITLE} starting: {args.command}")

    if not check_environment():
        return EXIT_FAILURE

    try:
        config = load_config(args.profile, args.config)
        return args.handler(args, config)
    except (ConfigError, MazeParseError, ArtifactError, PlanningError, ExportError) as e:
        log_exception(logger, e, f"{args.command} failed")
        return exit_code_for(e)
    except Exception as e:
        log_exception(logger, e, f"{args.command} aborted")
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
