#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
HierNav - Test Fixtures
-----------------------
Shared fixtures: seeded generators, bundled mazes and a scripted LinearPoint
stack whose dynamics models are exact
"""

import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from core.behavior import BehaviorLibrary, ConstantActionBehavior, default_specs  # noqa: E402
from core.config import MpcConfig  # noqa: E402
from core.crawler import LINEAR_POINT_PARTITION, LinearPointEnv  # noqa: E402
from core.dynamics import BehaviorDynamicsModel  # noqa: E402
from core.graph import NavGraph  # noqa: E402
from core.maze import bundled_maze  # noqa: E402
from core.navigator import Navigator, RunConfig  # noqa: E402

STEP = 0.25
L = 3


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def mazes():
    return {name: bundled_maze(name) for name in ("corridor5", "open3", "cross", "skull", "two_route", "complex")}


def scripted_library(step=STEP):
    specs = default_specs(step)
    behaviors = [ConstantActionBehavior(spec, step) for spec in specs]
    return BehaviorLibrary(behaviors, LINEAR_POINT_PARTITION, "linear_point")


def exact_models(library, steps=L):
    return [BehaviorDynamicsModel.constant(np.array(b.spec.v) * steps, b.id, steps) for b in library]


def make_navigator(maze=None, start=None, graph=None, horizon=1, max_subgoal_steps=100, step=STEP, retry_blocked=False):
    """
    LinearPoint body driven by constant-action behaviors and exact models

    With a one-step horizon the controller always moves along the axis with the
    largest remaining offset, so a reachable subgoal is always reached.
    """
    env = LinearPointEnv(maze=maze, max_step=step, seed=0)
    if start is None:
        start = maze.start_xy() if maze is not None else (0.0, 0.0)
    env.reset(start)
    if graph is None:
        graph = NavGraph.from_maze(maze) if maze is not None else NavGraph(5, 5)
    library = scripted_library(step)
    return Navigator(
        env,
        graph,
        library,
        exact_models(library),
        MpcConfig(horizon=horizon, samples=16, behavior_prediction_steps=horizon),
        RunConfig(max_subgoal_steps=max_subgoal_steps),
        rng=np.random.default_rng(0),
        retry_blocked=retry_blocked,
    )


@pytest.fixture
def navigator_factory():
    return make_navigator
