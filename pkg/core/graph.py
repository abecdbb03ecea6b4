#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
HierNav - Navigation Graph
--------------------------
Top level of the hierarchy: a lattice of candidate nodes over the dimensions
of interest, with visited flags, learned edge statuses, frontier selection and
breadth-first path planning
"""

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from core.constants import (
    EDGE_BLOCKED,
    EDGE_FEASIBLE,
    EDGE_TRANSITIONS,
    EDGE_UNKNOWN,
    LATTICE_MOVES,
    MODE_EXPLORE,
)
from core.errors import ContractViolation, PlanningError
from utils.helper import as_vector
from utils.logger import get_logger

logger = get_logger("hiernav.graph")


@dataclass
class PlanPath:
    """Node sequence p_1..p_d; the first node is where the agent starts"""

    nodes: list = field(default_factory=list)

    @property
    def length(self):
        """Number of edges"""
        return max(0, len(self.nodes) - 1)

    @property
    def subgoals(self):
        return self.nodes[1:]


def edge_key(a, b):
    return (a, b) if a <= b else (b, a)


class NavGraph:
    """4-connected lattice with per-node visited flags and per-edge statuses"""

    def __init__(self, n_x, n_y, interval_x=1.0, interval_y=1.0, origin=(0.0, 0.0)):
        """
        Create a lattice of n_x * n_y nodes; node (i, j) sits at origin + (i*dx, j*dy)

        Args:
            n_x (int): Nodes along x
            n_y (int): Nodes along y
            interval_x (float): Spacing along x
            interval_y (float): Spacing along y
            origin (tuple): World position of node (0, 0)
        """
        if n_x < 1 or n_y < 1:
            raise ValueError(f"lattice needs at least one node, got {n_x}x{n_y}")
        self.n_x = int(n_x)
        self.n_y = int(n_y)
        self.interval = np.array([interval_x, interval_y], dtype=np.float64)
        self.origin = np.asarray(origin, dtype=np.float64)
        self.visited = set()
        self.edges = {}
        self._retryable = set()
        self._retried = set()

    @classmethod
    def from_maze(cls, maze, interval_x=1.0, interval_y=1.0):
        """Lattice covering the bounding box of the maze cell centres"""
        x_min, x_max, y_min, y_max = maze.bounds()
        n_x = int(math.floor((x_max - x_min) / interval_x + 1e-9)) + 1
        n_y = int(math.floor((y_max - y_min) / interval_y + 1e-9)) + 1
        return cls(n_x, n_y, interval_x, interval_y, origin=(x_min, y_min))

    @classmethod
    def from_config(cls, maze, graph_config):
        return cls.from_maze(maze, graph_config.interval_x, graph_config.interval_y)

    # Lattice geometry

    @property
    def nodes(self):
        return [(i, j) for i in range(self.n_x) for j in range(self.n_y)]

    def contains(self, node):
        i, j = node
        return 0 <= i < self.n_x and 0 <= j < self.n_y

    def _require(self, node):
        if not self.contains(node):
            raise PlanningError(f"node {node} is not in the {self.n_x}x{self.n_y} lattice")

    def node_xy(self, node):
        return self.origin + np.asarray(node, dtype=np.float64) * self.interval

    def neighbors(self, node):
        i, j = node
        return sorted(
            (i + di, j + dj) for di, dj in LATTICE_MOVES if self.contains((i + di, j + dj))
        )

    def adjacent(self, a, b):
        return abs(a[0] - b[0]) + abs(a[1] - b[1]) == 1

    def lattice_edges(self):
        edges = []
        for node in self.nodes:
            for other in self.neighbors(node):
                if node < other:
                    edges.append((node, other))
        return edges

    def in_bounds(self, s_h):
        """True when s_h lies within half an interval of the lattice"""
        s_h = as_vector(s_h, 2, "s_h")
        low = self.origin - self.interval / 2.0
        high = self.origin + (np.array([self.n_x, self.n_y]) - 0.5) * self.interval
        return bool(np.all(s_h >= low) and np.all(s_h <= high))

    def associate(self, s_h, mark=False):
        """
        Nearest lattice node to s_h; exact ties resolve to the smaller index

        Args:
            s_h (array-like): Point over the dimensions of interest
            mark (bool): Also mark the node visited

        Returns:
            tuple: Node id (i, j)
        """
        s_h = as_vector(s_h, 2, "s_h")
        scaled = (s_h - self.origin) / self.interval
        i = min(max(math.ceil(scaled[0] - 0.5), 0), self.n_x - 1)
        j = min(max(math.ceil(scaled[1] - 0.5), 0), self.n_y - 1)
        node = (int(i), int(j))
        if mark:
            self.mark_visited(node)
        return node

    # Learned state

    def mark_visited(self, node):
        self._require(node)
        if node not in self.visited:
            self.visited.add(node)
            logger.debug(f"visited {node}")

    def status(self, a, b):
        return self.edges.get(edge_key(a, b), EDGE_UNKNOWN)

    def set_status(self, a, b, status):
        if not self.adjacent(a, b):
            raise ContractViolation(f"nodes {a} and {b} are not lattice neighbours")
        key = edge_key(a, b)
        current = self.edges.get(key, EDGE_UNKNOWN)
        if current == status:
            return
        if (current, status) not in EDGE_TRANSITIONS:
            raise ContractViolation(f"edge {key}: transition {current} -> {status} not allowed")
        self.edges[key] = status

    def record_transition(self, from_node, to_node, success):
        """
        Learn the status of one edge from a traversal attempt

        Args:
            from_node (tuple): Node the attempt started from
            to_node (tuple): Node the agent tried to reach
            success (bool): Reached within the step budget

        Returns:
            NavGraph: self
        """
        self._require(from_node)
        self._require(to_node)
        if not self.adjacent(from_node, to_node):
            raise ContractViolation(f"nodes {from_node} and {to_node} are not lattice neighbours")
        key = edge_key(from_node, to_node)
        if key in self._retryable:
            self._retryable.discard(key)
            self._retried.add(key)
        if success:
            self.set_status(from_node, to_node, EDGE_FEASIBLE)
            self.mark_visited(from_node)
            self.mark_visited(to_node)
        else:
            if self.status(from_node, to_node) != EDGE_BLOCKED:
                logger.info(f"edge {from_node} -> {to_node} blocked")
            self.set_status(from_node, to_node, EDGE_BLOCKED)
        return self

    def reopen_blocked(self):
        """Allow one more attempt at every blocked edge not retried yet"""
        fresh = {
            key
            for key, status in self.edges.items()
            if status == EDGE_BLOCKED and key not in self._retried and key not in self._retryable
        }
        self._retryable |= fresh
        return len(fresh)

    def _passable(self, a, b):
        key = edge_key(a, b)
        return self.edges.get(key, EDGE_UNKNOWN) != EDGE_BLOCKED or key in self._retryable

    # Search

    def _feasible_distances(self, start):
        """BFS hop counts from start over Feasible edges"""
        dist = {start: 0}
        queue = deque([start])
        while queue:
            node = queue.popleft()
            for other in self.neighbors(node):
                if other not in dist and self.status(node, other) == EDGE_FEASIBLE:
                    dist[other] = dist[node] + 1
                    queue.append(other)
        return dist

    def plan_path(self, start, goal):
        """
        Shortest path over Feasible edges

        Args:
            start (tuple): Start node
            goal (tuple): Goal node

        Returns:
            PlanPath | None: None when the goal is unreachable
        """
        self._require(start)
        self._require(goal)
        parents = {start: None}
        queue = deque([start])
        while queue:
            node = queue.popleft()
            if node == goal:
                path = []
                while node is not None:
                    path.append(node)
                    node = parents[node]
                return PlanPath(path[::-1])
            for other in self.neighbors(node):
                if other not in parents and self.status(node, other) == EDGE_FEASIBLE:
                    parents[other] = node
                    queue.append(other)
        return None

    def exploration_route(self, current):
        """
        Closest unvisited node next to the Feasible component of current, with its route

        Candidates are unvisited neighbours of the component reachable through
        any edge that is not Blocked; cost is the Feasible hop count to the
        frontier neighbour plus one, ties broken by smallest (row, col).

        Returns:
            tuple: (target, frontier neighbour inside the component), or None when done
        """
        self._require(current)
        dist = self._feasible_distances(current)
        best = None
        for node, hops in dist.items():
            for other in self.neighbors(node):
                if other in dist or other in self.visited or not self._passable(node, other):
                    continue
                candidate = (hops + 1, other[1], other[0], node[1], node[0])
                if best is None or candidate < best:
                    best = candidate
        if best is None:
            return None
        _, tj, ti, vj, vi = best
        return (ti, tj), (vi, vj)

    def select_exploration_target(self, current):
        """Closest unexplored node by traversal cost, or None when exploration is done"""
        route = self.exploration_route(current)
        return None if route is None else route[0]

    def select_goal(self, current, mode, target=None):
        """
        Explore mode: next frontier node. Reach mode: node associated with target.
        """
        if mode == MODE_EXPLORE:
            return self.select_exploration_target(current)
        if target is None:
            raise ValueError("reach mode needs a target")
        if not self.in_bounds(target):
            logger.warning(f"target {tuple(target)} lies outside the lattice; clamping")
        return self.associate(target)

    # Reporting

    def counts(self):
        statuses = list(self.edges.values())
        return {
            "visited": len(self.visited),
            "feasible": statuses.count(EDGE_FEASIBLE),
            "blocked": statuses.count(EDGE_BLOCKED),
        }

    def snapshot(self):
        """JSON-ready description of nodes and every lattice edge"""
        return {
            "delta": float(self.interval[0]),
            "interval": self.interval.tolist(),
            "origin": self.origin.tolist(),
            "shape": [self.n_x, self.n_y],
            "nodes": [
                {"rc": [n[1], n[0]], "xy": self.node_xy(n).tolist(), "visited": n in self.visited}
                for n in self.nodes
            ],
            "edges": [
                {"a": [a[1], a[0]], "b": [b[1], b[0]], "status": self.status(a, b)}
                for a, b in self.lattice_edges()
            ],
        }

    @classmethod
    def from_snapshot(cls, data):
        n_x, n_y = data["shape"]
        dx, dy = data.get("interval", [data["delta"], data["delta"]])
        graph = cls(n_x, n_y, dx, dy, origin=data.get("origin", (0.0, 0.0)))
        for entry in data["nodes"]:
            if entry["visited"]:
                row, col = entry["rc"]
                graph.visited.add((col, row))
        for entry in data["edges"]:
            if entry["status"] != EDGE_UNKNOWN:
                (ra, ca), (rb, cb) = entry["a"], entry["b"]
                graph.edges[edge_key((ca, ra), (cb, rb))] = entry["status"]
        return graph


def wall_crossing_edges(graph, maze):
    """Feasible edges whose straight segment passes through a wall cell"""
    crossing = []
    for (a, b), status in sorted(graph.edges.items()):
        if status == EDGE_FEASIBLE and maze.segment_hits_wall(graph.node_xy(a), graph.node_xy(b)):
            crossing.append((a, b))
    return crossing
