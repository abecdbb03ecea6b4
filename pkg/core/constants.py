#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
HierNav - Constants
-------------------
This file stores the constants shared across the hierarchy
"""

import os
from pathlib import Path

TITLE = "HierNav"
LOGGER_ROOT = "hiernav"

# Crawler body (desk-scale stand-in for the legged robot)
CRAWLER_DT = 0.1  # seconds per step
CRAWLER_WHEEL_RADIUS = 0.5
CRAWLER_AXLE_WIDTH = 1.0
CRAWLER_DRAG = 0.5
CRAWLER_MAX_WHEEL_ACCEL = 2.0

# LinearPoint body: displacement = clipped action * max step
LINEAR_POINT_MAX_STEP = 0.25

# Observation layout of the crawler: (w_L, w_R, x, y, phi[, cos phi, sin phi])
CRAWLER_PROPRIO_IDX = (0, 1)
CRAWLER_COMPASS_IDX = (5, 6)
CRAWLER_EXTERNAL_IDX = (2, 3, 4)
CRAWLER_INTEREST_IDX = (2, 3)

# Maze characters
CELL_WALL = "#"
CELL_FREE = "."
CELL_START = "S"
CELL_GOAL = "G"
MAZE_CHARS = (CELL_WALL, CELL_FREE, CELL_START, CELL_GOAL)

# Edge statuses
EDGE_UNKNOWN = "unknown"
EDGE_FEASIBLE = "feasible"
EDGE_BLOCKED = "blocked"

# Allowed status changes; Unknown is never re-entered
EDGE_TRANSITIONS = {
    (EDGE_UNKNOWN, EDGE_FEASIBLE),
    (EDGE_UNKNOWN, EDGE_BLOCKED),
    (EDGE_BLOCKED, EDGE_FEASIBLE),
    (EDGE_FEASIBLE, EDGE_BLOCKED),
}

# 4-connected lattice moves (di, dj)
LATTICE_MOVES = ((1, 0), (-1, 0), (0, 1), (0, -1))

# Run outcomes
OUTCOME_GOAL_REACHED = "goal_reached"
OUTCOME_SUBGOAL_TIMEOUT = "subgoal_timeout"
OUTCOME_EPISODE_CAP = "episode_cap"
OUTCOME_DEVIATED = "deviated"
OUTCOME_UNREACHABLE = "unreachable"

# Run modes
MODE_EXPLORE = "explore"
MODE_GOAL = "goal"
MODE_WAYPOINTS = "waypoints"
MODE_BENCHMARK = "benchmark"
MODE_FREE = "free"
MODES = (MODE_EXPLORE, MODE_GOAL, MODE_WAYPOINTS, MODE_BENCHMARK, MODE_FREE)

# Exit codes
EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_MISSING_ARTIFACTS = 3
EXIT_PLANNING = 4
EXIT_EXPORT = 5

# Artifact file names
LIBRARY_FILE = "library.json"
BEHAVIOR_FILE = "behavior_{id}.json"
REPLAY_FILE = "replay_{id}.npz"
DYNAMICS_FILE = "dynamics_{id}.json"
HOLDOUT_REPORT_FILE = "holdout_report.json"
GRAPH_SNAPSHOT_FILE = "graph_{index:04d}.json"
TRACE_FILE = "trace.csv"
METRICS_FILE = "metrics.csv"
RUN_INFO_FILE = "run.json"
NETWORK_FORMAT_VERSION = 1

TRACE_COLUMNS = (
    "step",
    "x",
    "y",
    "phi",
    "wL",
    "wR",
    "behavior_idx",
    "subgoal_x",
    "subgoal_y",
)
METRICS_COLUMNS = (
    "run_id",
    "seed",
    "maze",
    "mode",
    "total_steps",
    "success",
    "replans",
    "subgoal_timeouts",
)

# Reference numbers from the legged-robot experiments, logged for context only
REFERENCE_STEPS = {
    "cross": ("20704.8 (6043.8)", "208.8 (16.9)"),
    "skull": ("30846.8 (560.7)", "229.6 (37.9)"),
    "complex": ("95830.6 (15830.6)", "991.8 (152.7)"),
}
REFERENCE_NORMALIZED_DISTANCE = "0.49 (0.17)"

# Worker pool cap
THREADS_ENV_VAR = "HIERNAV_THREADS"
SEED_ENV_VAR = "HIERNAV_SEED"
DEFAULT_THREADS = max(1, min(8, os.cpu_count() or 1))

# Assets paths
ROOT_DIR = Path(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
ASSETS_DIR = ROOT_DIR / "assets"
MAZES_DIR = ASSETS_DIR / "mazes"
BUNDLED_CONFIG = ROOT_DIR / "config.yaml"
