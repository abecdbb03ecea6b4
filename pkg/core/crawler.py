#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
HierNav - Environments
----------------------
Desk-scale 2D bodies moving through a maze: the two-wheel Crawler and the
LinearPoint test body, with the proprioceptive / external observation split
"""

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from core.constants import (
    CRAWLER_AXLE_WIDTH,
    CRAWLER_COMPASS_IDX,
    CRAWLER_DRAG,
    CRAWLER_DT,
    CRAWLER_EXTERNAL_IDX,
    CRAWLER_INTEREST_IDX,
    CRAWLER_MAX_WHEEL_ACCEL,
    CRAWLER_PROPRIO_IDX,
    CRAWLER_WHEEL_RADIUS,
    LINEAR_POINT_MAX_STEP,
    TRACE_COLUMNS,
)
from core.errors import ShapeError
from utils.helper import as_vector, project, require_finite
from utils.logger import get_logger

logger = get_logger("hiernav.env")

# Open-arena training poses are drawn from this square
ARENA_HALF_WIDTH = 5.0


def wrap_angle(angle):
    """Wrap a scalar angle to (-pi, pi]"""
    wrapped = math.remainder(float(angle), 2.0 * math.pi)
    return math.pi if wrapped == -math.pi else wrapped


def wrap_angles(angles):
    """Element-wise wrap to [-pi, pi]"""
    angles = np.asarray(angles, dtype=np.float64)
    return np.arctan2(np.sin(angles), np.cos(angles))


@dataclass(frozen=True)
class ObservationPartition:
    """Index map splitting a flat observation into s^l, s^m and s^h"""

    obs_dim: int
    proprio_idx: tuple
    external_idx: tuple
    interest_idx: tuple
    angular_idx: tuple = ()

    def __post_init__(self):
        proprio, external = set(self.proprio_idx), set(self.external_idx)
        if proprio & external:
            raise ShapeError("proprioceptive and external indices overlap")
        if proprio | external != set(range(self.obs_dim)):
            raise ShapeError("partition does not cover the observation")
        if not set(self.interest_idx) <= external:
            raise ShapeError("interest indices must be external")
        if not set(self.angular_idx) <= external:
            raise ShapeError("angular indices must be external")

    @property
    def interest_in_external(self):
        """Positions of the interest dims inside an s^m vector"""
        return tuple(self.external_idx.index(i) for i in self.interest_idx)

    @property
    def angular_in_external(self):
        return tuple(self.external_idx.index(i) for i in self.angular_idx)

    def proprio(self, obs):
        return project(obs, self.proprio_idx)

    def external(self, obs):
        return project(obs, self.external_idx)

    def interest(self, obs):
        return project(obs, self.interest_idx)


def assemble(s_l, s_m, partition):
    """Rebuild a flat observation from its proprioceptive and external parts"""
    obs = np.zeros(partition.obs_dim)
    obs[list(partition.proprio_idx)] = as_vector(s_l, len(partition.proprio_idx), "s_l")
    obs[list(partition.external_idx)] = as_vector(s_m, len(partition.external_idx), "s_m")
    return obs


CRAWLER_PARTITION = ObservationPartition(
    obs_dim=5,
    proprio_idx=CRAWLER_PROPRIO_IDX,
    external_idx=CRAWLER_EXTERNAL_IDX,
    interest_idx=CRAWLER_INTEREST_IDX,
    angular_idx=(4,),
)
CRAWLER_COMPASS_PARTITION = ObservationPartition(
    obs_dim=7,
    proprio_idx=CRAWLER_PROPRIO_IDX + CRAWLER_COMPASS_IDX,
    external_idx=CRAWLER_EXTERNAL_IDX,
    interest_idx=CRAWLER_INTEREST_IDX,
    angular_idx=(4,),
)
LINEAR_POINT_PARTITION = ObservationPartition(
    obs_dim=2, proprio_idx=(), external_idx=(0, 1), interest_idx=(0, 1)
)


@dataclass(frozen=True)
class CrawlerParams:
    dt: float = CRAWLER_DT
    wheel_radius: float = CRAWLER_WHEEL_RADIUS
    axle_width: float = CRAWLER_AXLE_WIDTH
    drag: float = CRAWLER_DRAG
    max_wheel_accel: float = CRAWLER_MAX_WHEEL_ACCEL

    @property
    def max_wheel_speed(self):
        return self.max_wheel_accel / self.drag

    @property
    def max_speed(self):
        return self.wheel_radius * self.max_wheel_speed


@dataclass(frozen=True)
class CrawlerState:
    x: float = 0.0
    y: float = 0.0
    phi: float = 0.0
    w_left: float = 0.0
    w_right: float = 0.0

    @property
    def position(self):
        return np.array([self.x, self.y])


@dataclass
class Transition:
    obs_t: np.ndarray
    action: np.ndarray
    obs_t1: np.ndarray
    step_index: int
    episode_id: int = 0


@dataclass
class StepRecord:
    """One row of an exported episode trace"""

    step: int
    x: float
    y: float
    phi: float = 0.0
    wL: float = 0.0
    wR: float = 0.0
    behavior_idx: int = -1
    subgoal_x: float = float("nan")
    subgoal_y: float = float("nan")
    cost: float = float("nan")


def _blocked(maze, x, y):
    return maze is not None and not maze.is_free(x, y)


def step(state, action, maze=None, params=CrawlerParams()):
    """
    Advance the Crawler by one timestep

    Args:
        state (CrawlerState): Current state
        action (array-like): Wheel accelerations in [-1, 1]^2 (left, right)
        maze (Maze, optional): Walls to collide with; None is open space
        params (CrawlerParams): Body constants

    Returns:
        CrawlerState: Next state
    """
    action = as_vector(action, 2, "action")
    require_finite(action, "action")
    action = np.clip(action, -1.0, 1.0)

    dt = params.dt
    w_left = state.w_left + dt * (action[0] * params.max_wheel_accel - params.drag * state.w_left)
    w_right = state.w_right + dt * (action[1] * params.max_wheel_accel - params.drag * state.w_right)
    speed = params.wheel_radius * (w_left + w_right) / 2.0
    turn_rate = params.wheel_radius * (w_right - w_left) / params.axle_width

    x = state.x + speed * math.cos(state.phi) * dt
    y = state.y + speed * math.sin(state.phi) * dt
    phi = wrap_angle(state.phi + turn_rate * dt)

    if _blocked(maze, x, y):
        # Displacement cancelled; heading and wheels keep their update
        x, y = state.x, state.y
    return CrawlerState(x=x, y=y, phi=phi, w_left=w_left, w_right=w_right)


def observe(state, compass=False):
    """
    Flat observation (w_L, w_R, x, y, phi), plus (cos phi, sin phi) with a compass
    """
    obs = [state.w_left, state.w_right, state.x, state.y, state.phi]
    if compass:
        obs += [math.cos(state.phi), math.sin(state.phi)]
    return np.array(obs, dtype=np.float64)


def reset_orientation(state):
    """Zero the wheel speeds in place; pose is kept"""
    return replace(state, w_left=0.0, w_right=0.0)


class _Environment:
    """Episode bookkeeping shared by the bodies"""

    body = None
    action_dim = 2

    def __init__(self, maze=None, rng=None, seed=None):
        self.maze = maze
        self.rng = rng if rng is not None else np.random.default_rng(seed)
        self.episode_id = -1
        self.step_index = 0

    @property
    def partition(self):
        raise NotImplementedError

    @property
    def obs_dim(self):
        return self.partition.obs_dim

    def _random_xy(self):
        if self.maze is None:
            return self.rng.uniform(-ARENA_HALF_WIDTH, ARENA_HALF_WIDTH, size=2)
        cells = self.maze.free_cells()
        row, col = cells[self.rng.integers(len(cells))]
        return self.maze.cell_center(row, col)

    def _begin_episode(self):
        self.episode_id += 1
        self.step_index = 0

    def step(self, action):
        """
        Apply one action

        Returns:
            Transition: (obs_t, action, obs_t1) with episode bookkeeping
        """
        obs_t = self.observation
        action = as_vector(action, self.action_dim, "action")
        require_finite(action, "action")
        action = np.clip(action, -1.0, 1.0)
        self._advance(action)
        transition = Transition(
            obs_t=obs_t,
            action=action,
            obs_t1=self.observation,
            step_index=self.step_index,
            episode_id=self.episode_id,
        )
        self.step_index += 1
        return transition

    def record(self, step_no, behavior_idx=-1, subgoal=None, cost=float("nan")):
        raise NotImplementedError


class CrawlerEnv(_Environment):
    """Nonholonomic two-wheel body with wheel inertia"""

    body = "crawler"

    def __init__(self, maze=None, compass=False, params=None, rng=None, seed=None):
        super().__init__(maze=maze, rng=rng, seed=seed)
        self.compass = compass
        self.params = params or CrawlerParams()
        self.state = CrawlerState()

    @classmethod
    def from_config(cls, env_config, maze=None, rng=None):
        params = CrawlerParams(
            dt=env_config.dt,
            wheel_radius=env_config.wheel_radius,
            axle_width=env_config.axle_width,
            drag=env_config.drag,
            max_wheel_accel=env_config.max_wheel_accel,
        )
        return cls(maze=maze, compass=env_config.compass, params=params, rng=rng)

    @property
    def partition(self):
        return CRAWLER_COMPASS_PARTITION if self.compass else CRAWLER_PARTITION

    @property
    def observation(self):
        return observe(self.state, compass=self.compass)

    @property
    def position(self):
        return self.state.position

    @property
    def max_step_length(self):
        return self.params.max_speed * self.params.dt

    def reset(self, pose=None):
        """
        Start a new episode at rest

        Args:
            pose (tuple, optional): (x, y, phi); random free pose when omitted

        Returns:
            np.ndarray: First observation
        """
        if pose is None:
            x, y = self._random_xy()
            phi = self.rng.uniform(-math.pi, math.pi)
        else:
            x, y, phi = (list(pose) + [0.0])[:3]
        self.state = CrawlerState(x=float(x), y=float(y), phi=float(wrap_angle(phi)))
        self._begin_episode()
        return self.observation

    def _advance(self, action):
        self.state = step(self.state, action, self.maze, self.params)

    def reset_orientation(self):
        self.state = reset_orientation(self.state)

    def record(self, step_no, behavior_idx=-1, subgoal=None, cost=float("nan")):
        sx, sy = subgoal if subgoal is not None else (float("nan"), float("nan"))
        return StepRecord(
            step=step_no,
            x=self.state.x,
            y=self.state.y,
            phi=self.state.phi,
            wL=self.state.w_left,
            wR=self.state.w_right,
            behavior_idx=behavior_idx,
            subgoal_x=float(sx),
            subgoal_y=float(sy),
            cost=cost,
        )


class LinearPointEnv(_Environment):
    """Point body whose action is a clipped velocity on (x, y)"""

    body = "linear_point"

    def __init__(self, maze=None, max_step=LINEAR_POINT_MAX_STEP, rng=None, seed=None):
        super().__init__(maze=maze, rng=rng, seed=seed)
        self.max_step = float(max_step)
        self.xy = np.zeros(2)

    @classmethod
    def from_config(cls, env_config, maze=None, rng=None):
        return cls(maze=maze, max_step=env_config.linear_point_max_step, rng=rng)

    @property
    def partition(self):
        return LINEAR_POINT_PARTITION

    @property
    def observation(self):
        return self.xy.copy()

    @property
    def position(self):
        return self.xy.copy()

    @property
    def max_step_length(self):
        return self.max_step * math.sqrt(2.0)

    def reset(self, pose=None):
        self.xy = self._random_xy() if pose is None else as_vector(pose[:2], 2, "pose")
        self._begin_episode()
        return self.observation

    def _advance(self, action):
        candidate = self.xy + action * self.max_step
        if not _blocked(self.maze, candidate[0], candidate[1]):
            self.xy = candidate

    def reset_orientation(self):
        """No velocity state to clear"""

    def record(self, step_no, behavior_idx=-1, subgoal=None, cost=float("nan")):
        sx, sy = subgoal if subgoal is not None else (float("nan"), float("nan"))
        return StepRecord(
            step=step_no,
            x=float(self.xy[0]),
            y=float(self.xy[1]),
            behavior_idx=behavior_idx,
            subgoal_x=float(sx),
            subgoal_y=float(sy),
            cost=cost,
        )


def make_env(env_config, maze=None, rng=None):
    """Build the body named in the env section of the pipeline config"""
    if env_config.body == "linear_point":
        return LinearPointEnv.from_config(env_config, maze=maze, rng=rng)
    return CrawlerEnv.from_config(env_config, maze=maze, rng=rng)


def write_trace_csv(records, path):
    """
    Write step records as CSV

    Args:
        records (Iterable[StepRecord]): Rows in step order
        path (str | Path): Output file

    Returns:
        Path: The written file
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(TRACE_COLUMNS)
        for rec in records:
            writer.writerow([getattr(rec, column) for column in TRACE_COLUMNS])
    return path


def read_trace_csv(path):
    """Read a trace written by write_trace_csv"""
    records = []
    with open(path, "r", newline="", encoding="utf-8") as f:
        for row in csv.DictReader(f):
            records.append(
                StepRecord(
                    step=int(row["step"]),
                    x=float(row["x"]),
                    y=float(row["y"]),
                    phi=float(row["phi"]),
                    wL=float(row["wL"]),
                    wR=float(row["wR"]),
                    behavior_idx=int(row["behavior_idx"]),
                    subgoal_x=float(row["subgoal_x"]),
                    subgoal_y=float(row["subgoal_y"]),
                )
            )
    return records
