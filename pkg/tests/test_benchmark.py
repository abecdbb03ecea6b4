#!/usr/bin/env python
# -*- coding: utf-8 -*-

import math

import numpy as np
import pytest

from core.behavior import build_library, collect_rollouts, default_specs
from core.benchmark import (
    BenchmarkSummary,
    GoalEpisode,
    RunOutcome,
    format_row,
    pick_goal_cell,
    read_metrics_csv,
    run_benchmark,
    run_single,
    setup_navigator,
    summarize,
    write_metrics_csv,
)
from core.config import PipelineConfig
from core.constants import METRICS_COLUMNS
from core.crawler import make_env
from core.dynamics import fit_library_models
from core.graph import NavGraph
from core.maze import load_maze
from tests.conftest import exact_models, scripted_library
from utils.helper import format_mean_std, spawn_rngs


@pytest.fixture
def linear_config():
    return PipelineConfig.from_dict(
        {
            "env": {"body": "linear_point", "linear_point_max_step": 0.25},
            "mpc": {"horizon": 1, "behavior_prediction_steps": 1},
            "run": {"benchmark_goals": 3, "benchmark_runs": 2, "seed": 10},
        }
    )


@pytest.fixture
def stack():
    library = scripted_library()
    return library, exact_models(library)


def test_format_mean_std_uses_population_statistics():
    assert format_mean_std([1, 2, 3]) == "2.0 (0.8)"
    assert format_mean_std([5.0]) == "5.0 (0.0)"
    assert format_mean_std([]) == "nan (nan)"


def test_format_row_layout():
    row = format_row("Cross", [20000.0, 21409.6], [200.0, 217.6])
    assert row == "Cross  20704.8 (704.8)  208.8 (8.8)"


def test_summary_row_and_success_rate():
    summary = BenchmarkSummary("skull", 2, [10, 30], [4.0, 6.0], goal_successes=3, goal_episodes=4)
    assert summary.row() == "Skull  20.0 (10.0)  5.0 (1.0)"
    assert summary.success_rate == 0.75


def test_goal_steps_average_every_episode():
    outcome = RunOutcome(0, 0, "open3", 100, True, 0, 0)
    assert math.isnan(outcome.goal_steps)
    outcome.goals = [GoalEpisode((1.0, 1.0), True, 10, 0, 0), GoalEpisode((3.0, 3.0), False, 21, 1, 1)]
    assert outcome.goal_steps == 15.5
    assert outcome.goal_successes == 1
    rows = outcome.metric_rows()
    assert [r["mode"] for r in rows] == ["explore", "goal", "goal"]
    assert all(set(r) == set(METRICS_COLUMNS) for r in rows)
    assert summarize("open3", [outcome]).goal_episodes == 2


def test_pick_goal_cell_avoids_current_node(mazes):
    maze = mazes["cross"]
    graph = NavGraph.from_maze(maze)
    rng = np.random.default_rng(0)
    for _ in range(20):
        row, col = pick_goal_cell(maze, graph, (5, 1), rng)
        assert (row, col) in maze.goal_cells()
        assert (row, col) != (1, 5)
    # Without goal cells any free cell will do
    plain = load_maze("#####\n#S..#\n#####\n")
    cell = pick_goal_cell(plain, NavGraph.from_maze(plain), (1, 1), rng)
    assert cell in [(1, 2), (1, 3)]


def test_setup_places_body_on_start(mazes, linear_config, stack):
    maze = mazes["corridor5"]
    navigator, _ = setup_navigator(maze, *stack, linear_config, seed=4)
    np.testing.assert_allclose(navigator.s_h, maze.start_xy())
    assert navigator.config.seed == 4
    assert navigator.env.maze is maze


def test_single_run_is_reproducible(mazes, linear_config, stack):
    maze = mazes["open3"]
    first = run_single(0, 5, maze, *stack, linear_config)
    second = run_single(0, 5, maze, *stack, linear_config)
    assert first == second
    assert first.explore_done
    assert len(first.goals) == 3
    assert first.goal_successes == 3


def test_benchmark_orders_runs_and_seeds(mazes, linear_config, stack):
    outcomes, summary = run_benchmark(mazes["corridor5"], *stack, linear_config, runs=3, max_workers=2)
    assert [o.run_id for o in outcomes] == [0, 1, 2]
    assert [o.seed for o in outcomes] == [10, 11, 12]
    assert summary.runs == 3
    assert summary.goal_episodes == 9
    assert summary.success_rate == 1.0
    assert summary.row().startswith("Corridor5  ")


def test_skull_goals_after_exploration(mazes, stack):
    config = PipelineConfig.from_dict(
        {
            "env": {"body": "linear_point", "linear_point_max_step": 0.25},
            "mpc": {"horizon": 1, "behavior_prediction_steps": 1},
            "run": {"benchmark_goals": 20, "seed": 2},
        }
    )
    outcome = run_single(0, 2, mazes["skull"], *stack, config)
    assert outcome.explore_done
    assert len(outcome.goals) == 20
    assert outcome.goal_successes >= 18


@pytest.mark.slow
def test_scripted_crawler_explores_cross_and_reaches_goals(mazes):
    config = PipelineConfig.from_dict(
        {
            "env": {"body": "crawler", "compass": True},
            "dynamics": {"hidden_sizes": [64, 64], "gradient_steps": 2000},
            "run": {"benchmark_goals": 20, "seed": 3},
        }
    )

    def env_factory(rng):
        return make_env(config.env, rng=rng)

    library = build_library(env_factory, default_specs(config.behavior.step_magnitude), config.behavior, scripted=True)
    for behavior, rng in zip(library, spawn_rngs(1, len(library))):
        library.replay[behavior.id] = collect_rollouts(env_factory(rng), behavior, 10000, 500)
    models, _ = fit_library_models(library, config.dynamics, seed=0)
    assert all(m.position_invariant for m in models)

    outcome = run_single(0, 3, mazes["cross"], library, models, config)
    assert outcome.explore_done
    assert outcome.explore_steps < 50000
    assert outcome.goal_successes >= 18


def test_benchmark_rejects_zero_runs(mazes, linear_config, stack):
    with pytest.raises(ValueError):
        run_benchmark(mazes["open3"], *stack, linear_config, runs=0)


def test_metrics_csv_round_trip(tmp_path):
    outcome = RunOutcome(2, 12, "cross", 812, True, 3, 3, [GoalEpisode((5.0, 1.0), True, 14, 0, 0)])
    path = write_metrics_csv(outcome.metric_rows(), tmp_path / "out" / "metrics.csv")
    assert path.read_text(encoding="utf-8").splitlines()[0] == ",".join(METRICS_COLUMNS)
    rows = read_metrics_csv(path)
    assert len(rows) == 2
    assert rows[0]["total_steps"] == "812"
    assert rows[1]["mode"] == "goal"
    assert rows[1]["success"] == "True"
