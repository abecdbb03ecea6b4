#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
HierNav - Benchmark
-------------------
Seeded repetitions of explore-then-navigate on one maze, run in a worker pool,
summarized as "mean (std)" rows and exported as metric rows
"""

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from core.constants import (
    METRICS_COLUMNS,
    MODE_BENCHMARK,
    MODE_EXPLORE,
    MODE_GOAL,
    REFERENCE_STEPS,
)
from core.crawler import make_env
from core.graph import NavGraph
from core.navigator import Navigator, RunConfig
from utils.helper import format_mean_std, spawn_rngs, worker_count
from utils.logger import get_logger

logger = get_logger("hiernav.benchmark")


@dataclass
class GoalEpisode:
    goal: tuple
    success: bool
    steps: int
    replans: int
    subgoal_timeouts: int


@dataclass
class RunOutcome:
    """One seeded repetition: an exploration phase followed by goal episodes"""

    run_id: int
    seed: int
    maze: str
    explore_steps: int
    explore_done: bool
    explore_replans: int
    explore_timeouts: int
    goals: list = field(default_factory=list)

    @property
    def goal_steps(self):
        """Mean steps per goal episode, nan when there were none"""
        if not self.goals:
            return math.nan
        return float(np.mean([g.steps for g in self.goals]))

    @property
    def goal_successes(self):
        return sum(1 for g in self.goals if g.success)

    def metric_rows(self):
        """One explore row followed by one row per goal episode"""
        rows = [
            {
                "run_id": self.run_id,
                "seed": self.seed,
                "maze": self.maze,
                "mode": MODE_EXPLORE,
                "total_steps": self.explore_steps,
                "success": self.explore_done,
                "replans": self.explore_replans,
                "subgoal_timeouts": self.explore_timeouts,
            }
        ]
        for g in self.goals:
            rows.append(
                {
                    "run_id": self.run_id,
                    "seed": self.seed,
                    "maze": self.maze,
                    "mode": MODE_GOAL,
                    "total_steps": g.steps,
                    "success": g.success,
                    "replans": g.replans,
                    "subgoal_timeouts": g.subgoal_timeouts,
                }
            )
        return rows


@dataclass
class BenchmarkSummary:
    maze: str
    runs: int
    explore_steps: list
    goal_steps: list
    goal_successes: int
    goal_episodes: int

    @property
    def success_rate(self):
        return self.goal_successes / self.goal_episodes if self.goal_episodes else math.nan

    def row(self, name=None):
        return format_row(name or self.maze.capitalize(), self.explore_steps, self.goal_steps)


def format_row(name, explore_steps, goal_steps):
    """
    Table row in the "Name  mean (std)  mean (std)" layout

    Args:
        name (str): Row label, usually the maze name
        explore_steps (list[float]): Exploration steps, one per run
        goal_steps (list[float]): Mean goal-reaching steps, one per run

    Returns:
        str: e.g. "Cross  20704.8 (6043.8)  208.8 (16.9)"
    """
    return f"{name}  {format_mean_std(explore_steps)}  {format_mean_std(goal_steps)}"


def pick_goal_cell(maze, graph, current, rng):
    """Random GoalCandidate cell (any free cell if the maze has none) off the current node"""
    cells = maze.goal_cells() or maze.free_cells()
    away = [c for c in cells if graph.associate(maze.cell_center(*c)) != current]
    choices = away or cells
    return choices[int(rng.integers(len(choices)))]


def setup_navigator(maze, library, models, config, seed, mode=MODE_BENCHMARK, on_snapshot=None):
    """
    Place a fresh body on the Start cell with a random heading and wrap it in a navigator

    Args:
        maze (Maze): Maze to run in
        library (BehaviorLibrary): Behaviors shared read-only across runs
        models (list[BehaviorDynamicsModel]): Dynamics models shared read-only
        config (PipelineConfig): Full configuration
        seed (int): Seed for the env, MPC and goal streams
        mode (str): Run mode recorded in the run configuration
        on_snapshot (Callable, optional): Passed on to the navigator

    Returns:
        tuple: (Navigator, goal rng)
    """
    env_rng, mpc_rng, goal_rng = spawn_rngs(seed, 3)
    env = make_env(config.env, maze=maze, rng=env_rng)
    x, y = maze.start_xy()
    env.reset((x, y, env_rng.uniform(-math.pi, math.pi)))

    navigator = Navigator(
        env,
        NavGraph.from_config(maze, config.graph),
        library,
        models,
        config.mpc,
        RunConfig.from_settings(config.run, mode=mode, seed=seed),
        rng=mpc_rng,
        on_snapshot=on_snapshot,
        retry_blocked=config.graph.retry_blocked,
    )
    return navigator, goal_rng


def run_single(run_id, seed, maze, library, models, config, on_snapshot=None):
    """
    Explore the maze from its Start cell, then navigate to random goal cells

    Returns:
        RunOutcome: Steps and outcomes of both phases
    """
    navigator, goal_rng = setup_navigator(maze, library, models, config, seed, MODE_BENCHMARK, on_snapshot)
    graph = navigator.graph

    explore = navigator.run_explore()
    outcome = RunOutcome(
        run_id=run_id,
        seed=seed,
        maze=maze.name,
        explore_steps=explore.steps,
        explore_done=explore.done,
        explore_replans=explore.replans,
        explore_timeouts=explore.subgoal_timeouts,
    )

    for _ in range(config.run.benchmark_goals):
        row, col = pick_goal_cell(maze, graph, navigator.current_node, goal_rng)
        goal = maze.cell_center(row, col)
        result = navigator.run_reach_goal(goal)
        outcome.goals.append(
            GoalEpisode(
                goal=(float(goal[0]), float(goal[1])),
                success=result.success,
                steps=result.steps,
                replans=result.replans,
                subgoal_timeouts=result.subgoal_timeouts,
            )
        )
        if navigator.total_steps >= config.run.episode_cap:
            logger.warning(f"run {run_id}: episode cap reached during goal episodes")
            break

    logger.info(
        f"run {run_id} (seed {seed}): explored in {outcome.explore_steps} steps, "
        f"{outcome.goal_successes}/{len(outcome.goals)} goals reached, "
        f"mean goal steps {outcome.goal_steps:.1f}"
    )
    return outcome


def summarize(maze_name, outcomes):
    return BenchmarkSummary(
        maze=maze_name,
        runs=len(outcomes),
        explore_steps=[o.explore_steps for o in outcomes],
        goal_steps=[o.goal_steps for o in outcomes if not math.isnan(o.goal_steps)],
        goal_successes=sum(o.goal_successes for o in outcomes),
        goal_episodes=sum(len(o.goals) for o in outcomes),
    )


def run_benchmark(maze, library, models, config, runs=None, base_seed=None, max_workers=None):
    """
    Run seeded repetitions in parallel

    Run k uses seed base_seed + k. Results come back ordered by run_id whatever
    the completion order.

    Returns:
        tuple: (list[RunOutcome], BenchmarkSummary)
    """
    runs = config.run.benchmark_runs if runs is None else int(runs)
    if runs < 1:
        raise ValueError(f"benchmark needs at least one run, got {runs}")
    base_seed = config.run.seed if base_seed is None else int(base_seed)

    logger.info(f"Benchmark on {maze.name}: {runs} runs, {config.run.benchmark_goals} goals each")
    if maze.name in REFERENCE_STEPS:
        explore_ref, goal_ref = REFERENCE_STEPS[maze.name]
        logger.info(f"Legged-robot reference for {maze.name}: explore {explore_ref}, goal {goal_ref}")

    def one(run_id):
        return run_single(run_id, base_seed + run_id, maze, library, models, config)

    with ThreadPoolExecutor(max_workers=worker_count(max_workers)) as pool:
        outcomes = list(pool.map(one, range(runs)))

    outcomes.sort(key=lambda o: o.run_id)
    summary = summarize(maze.name, outcomes)
    logger.info(f"Benchmark result: {summary.row()} (goal success {summary.success_rate:.2f})")
    return outcomes, summary


def write_metrics_csv(rows, path):
    """Write metric rows (dicts keyed by the metrics columns)"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=list(METRICS_COLUMNS))
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    return path


def read_metrics_csv(path):
    with open(path, "r", newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))
