#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
HierNav - Helpers
-----------------
Small functions shared by several packages
"""

import os

import numpy as np

from core.constants import DEFAULT_THREADS, THREADS_ENV_VAR
from core.errors import NumericError, ShapeError


def as_vector(values, dim=None, name="vector"):
    """
    Convert input to a 1-D float64 array, checking its length

    Args:
        values: Sequence or array
        dim (int, optional): Required length
        name (str): Name used in error messages

    Returns:
        np.ndarray: 1-D array
    """
    vec = np.asarray(values, dtype=np.float64).reshape(-1)
    if dim is not None and vec.shape[0] != dim:
        raise ShapeError(f"{name} has dimension {vec.shape[0]}, expected {dim}")
    return vec


def require_finite(values, what):
    """Raise NumericError when any component is NaN or infinite"""
    if not np.all(np.isfinite(values)):
        raise NumericError(f"non-finite {what}: {values}")


def project(obs, idx):
    """Select the given indices of an observation (works on batches too)"""
    obs = np.asarray(obs, dtype=np.float64)
    return obs[..., list(idx)]


def spawn_rngs(seed, count):
    """Independent generator streams derived from one seed"""
    children = np.random.SeedSequence(seed).spawn(count)
    return [np.random.default_rng(child) for child in children]


def worker_count(requested=None):
    """Worker pool size, capped by the HIERNAV_THREADS environment variable"""
    cap = os.getenv(THREADS_ENV_VAR)
    try:
        cap = int(cap) if cap else DEFAULT_THREADS
    except ValueError:
        cap = DEFAULT_THREADS
    cap = max(1, cap)
    if requested is None:
        return cap
    return max(1, min(cap, int(requested)))


def format_mean_std(values):
    """
    Format values as "mean (std)" with population statistics

    Args:
        values (list[float]): Samples

    Returns:
        str: e.g. "20704.8 (6043.8)"
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        return "nan (nan)"
    return f"{arr.mean():.1f} ({arr.std(ddof=0):.1f})"
