#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
HierNav - Navigator
-------------------
Top-down execution loop: goal selection, path planning, per-subgoal MPC
stepping with a step budget, edge learning and replanning
"""

from dataclasses import dataclass, field

import numpy as np

from core.constants import (
    MODE_EXPLORE,
    MODES,
    OUTCOME_DEVIATED,
    OUTCOME_EPISODE_CAP,
    OUTCOME_GOAL_REACHED,
    OUTCOME_SUBGOAL_TIMEOUT,
    OUTCOME_UNREACHABLE,
)
from core.errors import ConfigError, PlanningError, ShapeError
from core.graph import PlanPath
from core.mpc import select_behavior
from utils.helper import as_vector
from utils.logger import get_logger

logger = get_logger("hiernav.navigator")


@dataclass
class RunConfig:
    max_subgoal_steps: int = 100
    success_threshold: float = 0.5
    episode_cap: int = 200000
    mode: str = MODE_EXPLORE
    seed: int = 0

    def __post_init__(self):
        if self.max_subgoal_steps < 1:
            raise ConfigError("max_subgoal_steps must be at least 1", key="run.max_subgoal_steps")
        if not self.success_threshold > 0:
            raise ConfigError("success_threshold must be positive", key="run.success_threshold")
        if self.episode_cap < 1:
            raise ConfigError("episode_cap must be at least 1", key="run.episode_cap")
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode}", key="run.mode")

    @classmethod
    def from_settings(cls, settings, mode=MODE_EXPLORE, seed=None):
        return cls(
            max_subgoal_steps=settings.max_subgoal_steps,
            success_threshold=settings.success_threshold,
            episode_cap=settings.episode_cap,
            mode=mode,
            seed=settings.seed if seed is None else seed,
        )


@dataclass
class EpisodeTrace:
    """Per-step records plus how the episode ended"""

    records: list = field(default_factory=list)
    outcome: str = None
    failed_edge: tuple = None
    deviated_node: tuple = None

    def __len__(self):
        return len(self.records)

    @property
    def steps(self):
        return len(self.records)

    def positions(self):
        return np.array([[r.x, r.y] for r in self.records]).reshape(-1, 2)


@dataclass
class ExploreResult:
    steps: int
    replans: int
    subgoal_timeouts: int
    visited: int
    feasible: int
    blocked: int
    done: bool


@dataclass
class ReachResult:
    success: bool
    steps: int
    trace: EpisodeTrace
    replans: int = 0
    subgoal_timeouts: int = 0
    outcome: str = None


@dataclass
class WaypointResult:
    reached: int
    reward: float
    steps: int
    legs: list


@dataclass
class FreeSpaceResult:
    goal: np.ndarray
    normalized_distance: float
    final_distance: float
    trace: EpisodeTrace


def normalized_distance(trace, g, origin=(0.0, 0.0)):
    """
    Episode-averaged distance to goal over the initial goal distance

    Args:
        trace (EpisodeTrace): Positions visited, one per step
        g (array-like): Goal over the interest dims, relative to origin
        origin (array-like): Start position the goal is measured from

    Returns:
        float: (1/T) * sum_t |s_t - g| / |g|
    """
    g = as_vector(g, 2, "g")
    norm = float(np.linalg.norm(g))
    if norm == 0.0:
        raise ValueError("normalized distance needs a non-zero goal")
    if len(trace) == 0:
        raise ValueError("normalized distance needs at least one step")
    positions = trace.positions() - as_vector(origin, 2, "origin")
    return float(np.mean(np.linalg.norm(positions - g, axis=1)) / norm)


class Navigator:
    """Owns one environment, its graph and the learned lower levels"""

    def __init__(
        self,
        env,
        graph,
        library,
        models,
        mpc_config,
        run_config,
        rng=None,
        on_snapshot=None,
        retry_blocked=False,
    ):
        """
        Args:
            env: Environment placed at its start pose
            graph (NavGraph): Graph to learn and plan on (may be None for free space)
            library (BehaviorLibrary): Behaviors, indexed like models
            models (list[BehaviorDynamicsModel]): One dynamics model per behavior
            mpc_config (MpcConfig): Horizon, samples, exhaustive threshold
            run_config (RunConfig): Step budget, threshold, episode cap
            rng (np.random.Generator, optional): MPC sampling stream
            on_snapshot (Callable, optional): Called as on_snapshot(graph, step) after graph updates
            retry_blocked (bool): Give every blocked edge one more attempt after a sweep
        """
        if len(models) != len(library):
            raise ShapeError(f"{len(models)} dynamics models for {len(library)} behaviors")
        if graph is not None and run_config.success_threshold >= float(np.min(graph.interval)):
            raise ConfigError(
                "success threshold must be smaller than the grid interval", key="run.success_threshold"
            )
        self.env = env
        self.graph = graph
        self.library = library
        self.models = models
        self.mpc_config = mpc_config
        self.config = run_config
        self.rng = rng if rng is not None else np.random.default_rng(run_config.seed)
        self.on_snapshot = on_snapshot
        self.retry_blocked = retry_blocked

        part = env.partition
        self._proprio = list(part.proprio_idx)
        self._external = list(part.external_idx)
        self._interest = list(part.interest_idx)
        self._interest_in_external = part.interest_in_external

        self.total_steps = 0
        self.replans = 0
        self.subgoal_timeouts = 0
        self.explored = False
        self.history = EpisodeTrace()

    @property
    def s_h(self):
        return self.env.observation[self._interest]

    @property
    def current_node(self):
        return self.graph.associate(self.s_h, mark=True)

    def _snapshot(self):
        if self.on_snapshot is not None:
            self.on_snapshot(self.graph, self.total_steps)

    def step_toward(self, target_xy, trace):
        """One MPC decision and one environment step toward target_xy"""
        obs = self.env.observation
        decision = select_behavior(
            obs[self._external],
            target_xy,
            self.models,
            self.mpc_config,
            self.rng,
            self._interest_in_external,
        )
        behavior = self.library[decision.behavior]
        self.env.step(behavior.act(obs[self._proprio]))
        self.total_steps += 1
        record = self.env.record(self.total_steps, decision.behavior, target_xy, decision.cost)
        trace.records.append(record)
        self.history.records.append(record)
        return decision

    def run_subgoal_loop(self, path, trace=None):
        """
        Drive through the subgoals of a path

        The step counter c resets on every subgoal reached; the attempt fails once
        c exceeds the per-subgoal budget M, i.e. after M+1 steps on one subgoal.

        Args:
            path (PlanPath): Nodes to visit; the first is where the agent is
            trace (EpisodeTrace, optional): Trace to append to

        Returns:
            tuple: (success, EpisodeTrace with outcome and failing edge or node)
        """
        trace = trace if trace is not None else EpisodeTrace()
        if not path.nodes:
            raise PlanningError("cannot follow an empty path")
        budget = self.config.max_subgoal_steps
        threshold = self.config.success_threshold

        previous = path.nodes[0]
        last_node = previous
        subgoals = path.subgoals
        i = 0
        counter = 0
        while i < len(subgoals):
            target = subgoals[i]
            if counter > budget:
                trace.outcome = OUTCOME_SUBGOAL_TIMEOUT
                trace.failed_edge = (previous, target)
                logger.debug(f"subgoal {target} not reached in {budget} steps")
                return False, trace
            if self.total_steps >= self.config.episode_cap:
                trace.outcome = OUTCOME_EPISODE_CAP
                return False, trace

            target_xy = self.graph.node_xy(target)
            self.step_toward(target_xy, trace)
            counter += 1

            position = self.s_h
            node = self.graph.associate(position, mark=True)
            if np.linalg.norm(position - target_xy) < threshold:
                self.graph.record_transition(previous, target, True)
                previous = target
                i += 1
                counter = 0
            elif node not in (previous, target):
                # The body crossed into a free neighbour, so that edge is traversable
                if self.graph.adjacent(last_node, node):
                    self.graph.record_transition(last_node, node, True)
                trace.outcome = OUTCOME_DEVIATED
                trace.deviated_node = node
                logger.debug(f"deviated to {node} while heading {previous} -> {target}")
                return False, trace
            last_node = node

        trace.outcome = OUTCOME_GOAL_REACHED
        return True, trace

    def _handle_failure(self, trace):
        """Edge learning after a failed attempt; returns False when the run must stop"""
        if trace.outcome == OUTCOME_SUBGOAL_TIMEOUT:
            a, b = trace.failed_edge
            self.graph.record_transition(a, b, False)
            self.subgoal_timeouts += 1
            self.replans += 1
            self.env.reset_orientation()
            return True
        if trace.outcome == OUTCOME_DEVIATED:
            self.replans += 1
            return True
        return False

    def run_explore(self):
        """
        Explore until no unvisited node borders the feasible component

        Returns:
            ExploreResult: Steps and graph statistics for this call
        """
        start_steps = self.total_steps
        start_replans, start_timeouts = self.replans, self.subgoal_timeouts
        current = self.current_node
        self._snapshot()
        done = False

        while self.total_steps < self.config.episode_cap:
            route = self.graph.exploration_route(current)
            if route is None:
                if self.retry_blocked and self.graph.reopen_blocked():
                    logger.info("exploration sweep finished; retrying blocked edges")
                    continue
                done = True
                break

            target, via = route
            path = PlanPath(self.graph.plan_path(current, via).nodes + [target])
            logger.debug(f"exploring {target} via {via} ({path.length} edges)")
            ok, trace = self.run_subgoal_loop(path)
            if not ok and not self._handle_failure(trace):
                break
            current = self.current_node
            self._snapshot()

        self.explored = done
        counts = self.graph.counts()
        result = ExploreResult(
            steps=self.total_steps - start_steps,
            replans=self.replans - start_replans,
            subgoal_timeouts=self.subgoal_timeouts - start_timeouts,
            done=done,
            **counts,
        )
        logger.info(
            f"Exploration {'finished' if done else 'stopped'} after {result.steps} steps: "
            f"{result.visited} visited, {result.feasible} feasible, {result.blocked} blocked"
        )
        return result

    def run_reach_goal(self, goal_h):
        """
        Plan to the node of goal_h and follow it, replanning after failures

        Args:
            goal_h (array-like): Goal over the interest dims

        Returns:
            ReachResult: success flag, steps used, trace and replanning counts
        """
        goal_h = as_vector(goal_h, 2, "goal")
        if not self.graph.in_bounds(goal_h):
            raise PlanningError(f"goal {tuple(goal_h)} lies outside the lattice")
        goal = self.graph.associate(goal_h)
        start_steps = self.total_steps
        start_replans, start_timeouts = self.replans, self.subgoal_timeouts
        trace = EpisodeTrace()

        while True:
            current = self.current_node
            if current == goal:
                trace.outcome = OUTCOME_GOAL_REACHED
                break
            path = self.graph.plan_path(current, goal)
            if path is None:
                trace.outcome = OUTCOME_UNREACHABLE
                logger.warning(f"goal node {goal} unreachable from {current}")
                break
            ok, trace = self.run_subgoal_loop(path, trace)
            self._snapshot()
            if ok:
                break
            if not self._handle_failure(trace):
                break
            logger.info(f"replanning from {self.current_node} after {trace.outcome}")

        return ReachResult(
            success=trace.outcome == OUTCOME_GOAL_REACHED,
            steps=self.total_steps - start_steps,
            trace=trace,
            replans=self.replans - start_replans,
            subgoal_timeouts=self.subgoal_timeouts - start_timeouts,
            outcome=trace.outcome,
        )

    def run_waypoints(self, targets):
        """
        Visit targets in order; one unit of reward per waypoint reached in order

        Returns:
            WaypointResult: Stops at the first waypoint that cannot be reached
        """
        start_steps = self.total_steps
        legs = []
        for k, target in enumerate(targets):
            leg = self.run_reach_goal(target)
            legs.append(leg)
            if not leg.success:
                logger.warning(f"waypoint {k + 1} {tuple(target)} not reached ({leg.outcome})")
                break
            logger.info(f"waypoint {k + 1}/{len(targets)} reached after {leg.steps} steps")
        reached = sum(1 for leg in legs if leg.success)
        return WaypointResult(
            reached=reached, reward=float(reached), steps=self.total_steps - start_steps, legs=legs
        )

    def run_free_space(self, goal, steps=200):
        """
        Aim the MPC straight at a goal given relative to the start, for a fixed number of steps

        Returns:
            FreeSpaceResult: Includes the normalized distance to goal
        """
        goal = as_vector(goal, 2, "goal")
        origin = self.s_h.copy()
        target = origin + goal
        trace = EpisodeTrace()
        for _ in range(steps):
            self.step_toward(target, trace)
        trace.outcome = OUTCOME_EPISODE_CAP
        return FreeSpaceResult(
            goal=goal,
            normalized_distance=normalized_distance(trace, goal, origin),
            final_distance=float(np.linalg.norm(self.s_h - target)),
            trace=trace,
        )
