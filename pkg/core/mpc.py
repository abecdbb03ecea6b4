#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
HierNav - Behavior MPC
----------------------
Middle level, part two: choose the next behavior by scoring sequences of
behaviors with the learned dynamics models
"""

import itertools
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from utils.helper import as_vector
from utils.logger import get_logger

logger = get_logger("hiernav.mpc")


class MpcDecision(NamedTuple):
    behavior: int
    sequence: tuple
    cost: float


@lru_cache(maxsize=32)
def _all_sequences(n_behaviors, horizon):
    """Every sequence in {0..N-1}^H, lexicographic order"""
    seqs = np.array(list(itertools.product(range(n_behaviors), repeat=horizon)), dtype=np.int64)
    seqs.setflags(write=False)
    return seqs


def _interest(g_h, interest):
    return tuple(range(len(g_h))) if interest is None else tuple(interest)


def sequence_costs(sequences, s_m, g_h, models, interest=None):
    """
    Terminal cost of many behavior sequences at once

    Args:
        sequences (np.ndarray): (S, H) behavior indices
        s_m (array-like): Current external state
        g_h (array-like): Target over the interest dims
        models (list[BehaviorDynamicsModel]): One model per behavior index
        interest (tuple, optional): Positions of the interest dims inside s^m

    Returns:
        np.ndarray: (S,) squared distances between projected terminal states and g_h
    """
    sequences = np.asarray(sequences, dtype=np.int64)
    if sequences.ndim != 2:
        raise ValueError(f"sequences must be a 2-D index array, got shape {sequences.shape}")
    if sequences.size and (sequences.min() < 0 or sequences.max() >= len(models)):
        raise ValueError(f"unknown behavior index in {sequences.tolist()}; library has {len(models)}")
    g_h = as_vector(g_h, name="g_h")
    cols = list(_interest(g_h, interest))
    states = np.tile(as_vector(s_m, name="s_m"), (sequences.shape[0], 1))
    for depth in range(sequences.shape[1]):
        column = sequences[:, depth]
        for b in np.unique(column):
            rows = column == b
            states[rows] = models[b].predict(states[rows])
    return np.sum((states[:, cols] - g_h) ** 2, axis=1)


def rollout_cost(seq, s_m, g_h, models, interest=None):
    """Squared distance between g_h and the chained prediction of one sequence"""
    return float(sequence_costs(np.asarray([seq]), s_m, g_h, models, interest)[0])


def select_behavior(s_m, g_h, models, cfg, rng=None, interest=None):
    """
    Pick the first behavior of the cheapest sequence

    Enumerates {0..N-1}^H when N^H <= max(K, exhaustive_threshold), otherwise
    scores K uniform samples. Equal costs go to the lexicographically smallest
    sequence.

    Args:
        s_m (array-like): Current external state
        g_h (array-like): Target over the interest dims
        models (list[BehaviorDynamicsModel]): One per behavior
        cfg (MpcConfig): horizon, samples, exhaustive_threshold
        rng (np.random.Generator, optional): Only used in sampling mode
        interest (tuple, optional): Positions of the interest dims inside s^m

    Returns:
        MpcDecision: (behavior index, best sequence, best cost)
    """
    n = len(models)
    if n == 0:
        raise ValueError("MPC needs at least one behavior model")
    horizon, samples = cfg.horizon, cfg.samples
    if horizon < 1 or samples < 1:
        raise ValueError(f"horizon and samples must be positive, got H={horizon} K={samples}")

    if n**horizon <= max(samples, cfg.exhaustive_threshold):
        sequences = _all_sequences(n, horizon)
    else:
        rng = rng if rng is not None else np.random.default_rng()
        sequences = rng.integers(0, n, size=(samples, horizon))
        sequences = sequences[np.lexsort(sequences.T[::-1])]

    costs = sequence_costs(sequences, s_m, g_h, models, interest)
    best = int(np.argmin(costs))
    winner = tuple(int(b) for b in sequences[best])
    return MpcDecision(winner[0], winner, float(costs[best]))


def greedy_distance_baseline(s_m, g_h, models, interest=None):
    """Behavior whose single prediction lands closest to g_h"""
    singles = np.arange(len(models)).reshape(-1, 1)
    return int(np.argmin(sequence_costs(singles, s_m, g_h, models, interest)))
