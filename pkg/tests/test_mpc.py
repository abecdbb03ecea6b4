#!/usr/bin/env python
# -*- coding: utf-8 -*-

import itertools

import numpy as np
import pytest

from core.config import MpcConfig
from core.dynamics import BehaviorDynamicsModel
from core.mpc import greedy_distance_baseline, rollout_cost, select_behavior, sequence_costs


def constant_models(deltas):
    return [BehaviorDynamicsModel.constant(np.asarray(d, dtype=np.float64), i) for i, d in enumerate(deltas)]


def brute_force(s_m, g_h, deltas, horizon):
    """Lexicographically first sequence of minimal squared terminal distance"""
    best_seq, best_cost = None, None
    for seq in itertools.product(range(len(deltas)), repeat=horizon):
        state = np.array(s_m, dtype=np.float64)
        for b in seq:
            state = state + deltas[b]
        cost = float(np.sum((state - g_h) ** 2))
        if best_cost is None or cost < best_cost:
            best_seq, best_cost = seq, cost
    return best_seq, best_cost


def test_exhaustive_search_matches_brute_force():
    rng = np.random.default_rng(7)
    for _ in range(50):
        n = int(rng.integers(1, 5))
        horizon = int(rng.integers(1, 4))
        deltas = [rng.normal(size=2) for _ in range(n)]
        s_m = rng.normal(size=2) * 3
        g_h = rng.normal(size=2) * 3
        cfg = MpcConfig(horizon=horizon, samples=16, behavior_prediction_steps=horizon)
        decision = select_behavior(s_m, g_h, constant_models(deltas), cfg)
        seq, cost = brute_force(s_m, g_h, deltas, horizon)
        assert decision.sequence == seq
        assert decision.behavior == seq[0]
        assert decision.cost == pytest.approx(cost)


def test_ties_go_to_lexicographically_smallest():
    models = constant_models([[0.5, 0.0]] * 3)
    cfg = MpcConfig(horizon=2, samples=16, behavior_prediction_steps=2)
    decision = select_behavior([0.0, 0.0], [1.0, 0.0], models, cfg)
    assert decision.sequence == (0, 0)
    assert decision.cost == pytest.approx(0.0)


def test_interest_dims_select_columns():
    # s_m = (x, y, phi); only x and y are compared with the target
    models = constant_models([[1.0, 0.0, 3.0], [0.0, 1.0, 0.0]])
    cfg = MpcConfig(horizon=1, samples=16, behavior_prediction_steps=1)
    decision = select_behavior([0.0, 0.0, 0.0], [1.0, 0.0], models, cfg, interest=(0, 1))
    assert decision.behavior == 0
    assert decision.cost == pytest.approx(0.0)


def test_sampling_mode_scores_drawn_sequences():
    deltas = [[0.3, 0.0], [-0.3, 0.0], [0.0, 0.3], [0.0, -0.3]]
    models = constant_models(deltas)
    cfg = MpcConfig(horizon=3, samples=8, behavior_prediction_steps=3, exhaustive_threshold=1)
    s_m, g_h = [0.0, 0.0], [0.9, 0.0]
    first = select_behavior(s_m, g_h, models, cfg, rng=np.random.default_rng(3))
    again = select_behavior(s_m, g_h, models, cfg, rng=np.random.default_rng(3))
    assert first == again
    assert first.cost == pytest.approx(rollout_cost(first.sequence, s_m, g_h, models))
    _, optimum = brute_force(s_m, g_h, [np.array(d) for d in deltas], 3)
    assert first.cost >= optimum - 1e-12


def test_sampling_approaches_the_exhaustive_choice():
    models = constant_models([[0.3, 0.0], [-0.3, 0.0], [0.0, 0.3]])
    s_m, g_h = [0.0, 0.0], [0.6, 0.0]
    exhaustive = select_behavior(s_m, g_h, models, MpcConfig(horizon=2, samples=16, behavior_prediction_steps=2))
    assert exhaustive.sequence == (0, 0)

    def sampled(k, seed):
        cfg = MpcConfig(horizon=2, samples=k, behavior_prediction_steps=2, exhaustive_threshold=0)
        return select_behavior(s_m, g_h, models, cfg, rng=np.random.default_rng(seed))

    # Same seed: a larger K scores a superset of the sequences
    costs = [sampled(k, 5).cost for k in range(1, 9)]
    assert all(a >= b for a, b in zip(costs, costs[1:]))
    # K >= N^H enumerates every sequence
    assert sampled(9, 5) == exhaustive
    agree = sum(sampled(8, seed).behavior == exhaustive.behavior for seed in range(200))
    assert agree >= 140


def test_sequence_costs_validate_indices():
    models = constant_models([[1.0, 0.0]])
    with pytest.raises(ValueError):
        sequence_costs(np.array([[0, 1]]), [0.0, 0.0], [0.0, 0.0], models)
    with pytest.raises(ValueError):
        sequence_costs(np.array([0, 0]), [0.0, 0.0], [0.0, 0.0], models)
    with pytest.raises(ValueError):
        select_behavior([0.0, 0.0], [1.0, 0.0], [], MpcConfig())


def test_rollout_cost_chains_predictions():
    models = constant_models([[1.0, 0.0], [0.0, 2.0]])
    assert rollout_cost((0, 1, 1), [0.0, 0.0], [1.0, 4.0], models) == pytest.approx(0.0)
    assert rollout_cost((0,), [0.0, 0.0], [0.0, 0.0], models) == pytest.approx(1.0)


def test_greedy_baseline_picks_closest_single_step():
    models = constant_models([[0.25, 0.0], [-0.25, 0.0], [0.0, 0.25], [0.0, -0.25]])
    assert greedy_distance_baseline([0.0, 0.0], [0.0, -2.0], models) == 3
    assert greedy_distance_baseline([0.0, 0.0], [-1.0, 0.1], models) == 1
