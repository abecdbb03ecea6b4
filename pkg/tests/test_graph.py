#!/usr/bin/env python
# -*- coding: utf-8 -*-

import heapq
import json

import numpy as np
import pytest

from core.constants import EDGE_BLOCKED, EDGE_FEASIBLE, EDGE_UNKNOWN, MODE_EXPLORE, MODE_GOAL
from core.errors import ContractViolation, PlanningError
from core.graph import NavGraph, wall_crossing_edges
from core.maze import bundled_maze


def dijkstra_hops(graph, start, goal):
    """Independent shortest-path oracle over Feasible edges"""
    dist = {start: 0}
    heap = [(0, start)]
    while heap:
        d, node = heapq.heappop(heap)
        if node == goal:
            return d
        if d > dist[node]:
            continue
        i, j = node
        for other in ((i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1)):
            if not graph.contains(other) or graph.status(node, other) != EDGE_FEASIBLE:
                continue
            if d + 1 < dist.get(other, float("inf")):
                dist[other] = d + 1
                heapq.heappush(heap, (d + 1, other))
    return None


def random_graph(rng):
    graph = NavGraph(int(rng.integers(2, 16)), int(rng.integers(2, 16)))
    keep = rng.uniform(0.3, 0.9)
    for a, b in graph.lattice_edges():
        roll = rng.random()
        if roll < keep:
            graph.set_status(a, b, EDGE_FEASIBLE)
        elif roll < keep + 0.05:
            graph.set_status(a, b, EDGE_BLOCKED)
    return graph


def random_node(graph, rng):
    return (int(rng.integers(graph.n_x)), int(rng.integers(graph.n_y)))


def test_plan_path_matches_dijkstra():
    rng = np.random.default_rng(11)
    for _ in range(100):
        graph = random_graph(rng)
        start, goal = random_node(graph, rng), random_node(graph, rng)
        path = graph.plan_path(start, goal)
        hops = dijkstra_hops(graph, start, goal)
        if hops is None:
            assert path is None
            continue
        assert path.length == hops
        assert path.nodes[0] == start and path.nodes[-1] == goal
        for a, b in zip(path.nodes, path.nodes[1:]):
            assert graph.status(a, b) == EDGE_FEASIBLE


def test_plan_path_trivial_and_outside():
    graph = NavGraph(3, 3)
    path = graph.plan_path((1, 1), (1, 1))
    assert path.nodes == [(1, 1)]
    assert path.length == 0
    assert path.subgoals == []
    assert graph.plan_path((0, 0), (2, 2)) is None
    with pytest.raises(PlanningError):
        graph.plan_path((0, 0), (3, 0))


def test_exploration_targets_closest_unvisited_node_in_row_major_order():
    graph = NavGraph(3, 3)
    # (1, 0) is row 0, col 1 and wins the tie against (0, 1)
    assert graph.exploration_route((0, 0)) == ((1, 0), (0, 0))
    graph.record_transition((0, 0), (1, 0), True)
    assert graph.select_exploration_target((0, 0)) == (0, 1)
    graph.record_transition((0, 0), (0, 1), False)
    # Next closest is two hops away, through (1, 0)
    assert graph.exploration_route((0, 0)) == ((2, 0), (1, 0))


def test_exploration_from_a_lone_visited_node():
    graph = NavGraph(3, 3)
    graph.mark_visited((1, 1))
    assert graph.select_exploration_target((1, 1)) == (1, 0)


def test_exploration_skips_visited_nodes_outside_component():
    graph = NavGraph(2, 1)
    graph.mark_visited((0, 0))
    graph.mark_visited((1, 0))
    assert graph.select_exploration_target((0, 0)) is None


def test_exploration_done_when_component_is_sealed():
    graph = NavGraph(2, 2)
    graph.record_transition((0, 0), (1, 0), False)
    graph.record_transition((0, 0), (0, 1), False)
    assert graph.select_exploration_target((0, 0)) is None
    assert graph.select_goal((0, 0), MODE_EXPLORE) is None


def test_status_transitions():
    graph = NavGraph(3, 3)
    assert graph.status((0, 0), (1, 0)) == EDGE_UNKNOWN
    graph.set_status((0, 0), (1, 0), EDGE_FEASIBLE)
    graph.set_status((1, 0), (0, 0), EDGE_BLOCKED)
    assert graph.status((0, 0), (1, 0)) == EDGE_BLOCKED
    graph.set_status((0, 0), (1, 0), EDGE_FEASIBLE)
    with pytest.raises(ContractViolation):
        graph.set_status((0, 0), (1, 0), EDGE_UNKNOWN)
    with pytest.raises(ContractViolation):
        graph.set_status((0, 0), (1, 1), EDGE_FEASIBLE)
    with pytest.raises(ContractViolation):
        graph.record_transition((0, 0), (2, 0), True)


def test_successful_transition_marks_both_nodes():
    graph = NavGraph(3, 3)
    graph.record_transition((1, 1), (1, 2), True)
    assert graph.visited == {(1, 1), (1, 2)}
    graph.record_transition((1, 1), (2, 1), False)
    assert (2, 1) not in graph.visited
    assert graph.counts() == {"visited": 2, "feasible": 1, "blocked": 1}


def test_associate_rounds_and_clamps():
    graph = NavGraph(4, 3)
    assert graph.associate((1.2, 0.7)) == (1, 1)
    # Exact ties go to the smaller index
    assert graph.associate((0.5, 0.5)) == (0, 0)
    assert graph.associate((0.51, 1.5)) == (1, 1)
    assert graph.associate((-3.0, 10.0)) == (0, 2)
    graph.associate((2.0, 2.0), mark=True)
    assert (2, 2) in graph.visited


def test_in_bounds():
    graph = NavGraph(4, 3, origin=(1.0, 1.0))
    assert graph.in_bounds((0.5, 0.5))
    assert graph.in_bounds((4.5, 3.5))
    assert not graph.in_bounds((4.6, 2.0))
    assert not graph.in_bounds((2.0, 0.4))


def test_from_maze_covers_cell_centres():
    maze = bundled_maze("corridor5")
    graph = NavGraph.from_maze(maze)
    assert (graph.n_x, graph.n_y) == (maze.width, maze.height)
    start = graph.associate(maze.start_xy())
    np.testing.assert_allclose(graph.node_xy(start), maze.start_xy())


def test_select_goal_in_reach_mode():
    graph = NavGraph(4, 4)
    assert graph.select_goal((0, 0), MODE_GOAL, target=(2.1, 2.9)) == (2, 3)
    assert graph.select_goal((0, 0), MODE_GOAL, target=(9.0, 1.0)) == (3, 1)
    with pytest.raises(ValueError):
        graph.select_goal((0, 0), MODE_GOAL)


def test_snapshot_round_trip():
    graph = NavGraph(3, 2, interval_x=0.5, interval_y=2.0, origin=(1.0, -1.0))
    graph.record_transition((0, 0), (1, 0), True)
    graph.record_transition((1, 0), (1, 1), False)
    data = json.loads(json.dumps(graph.snapshot()))
    assert len(data["edges"]) == len(graph.lattice_edges())
    rows = {tuple(entry["rc"]) for entry in data["nodes"] if entry["visited"]}
    assert rows == {(0, 0), (0, 1)}
    assert {"a": [0, 1], "b": [1, 1], "status": EDGE_BLOCKED} in data["edges"]
    again = NavGraph.from_snapshot(data)
    assert again.visited == graph.visited
    assert again.edges == graph.edges
    np.testing.assert_allclose(again.node_xy((2, 1)), graph.node_xy((2, 1)))


def test_blocked_edges_reopen_once():
    graph = NavGraph(2, 1)
    graph.record_transition((0, 0), (1, 0), False)
    assert graph.select_exploration_target((0, 0)) is None
    assert graph.reopen_blocked() == 1
    assert graph.reopen_blocked() == 0
    assert graph.select_exploration_target((0, 0)) == (1, 0)
    graph.record_transition((0, 0), (1, 0), False)
    assert graph.reopen_blocked() == 0
    assert graph.select_exploration_target((0, 0)) is None


def test_wall_crossing_edges():
    maze = bundled_maze("corridor5")
    graph = NavGraph.from_maze(maze)
    graph.set_status((1, 1), (2, 1), EDGE_FEASIBLE)
    graph.set_status((1, 1), (1, 2), EDGE_FEASIBLE)
    assert wall_crossing_edges(graph, maze) == [((1, 1), (1, 2))]
