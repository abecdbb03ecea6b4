#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
HierNav - Behavior Dynamics
---------------------------
Middle level, part one: per-behavior models of the L-step change in the
external state, fitted on the final replay data of each behavior
"""

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from core.constants import DYNAMICS_FILE, HOLDOUT_REPORT_FILE
from core.crawler import wrap_angles
from core.errors import ArtifactError, EmptyDatasetError, ShapeError, TrainingAborted
from core.nncore import Mlp, Optimizer
from utils.helper import spawn_rngs, worker_count
from utils.logger import get_logger

logger = get_logger("hiernav.dynamics")


@dataclass
class DynamicsDataset:
    """Pairs (s^m_t, s^m_{t+L}) from uninterrupted runs of one behavior"""

    s_t: np.ndarray
    s_tL: np.ndarray
    L: int

    def __len__(self):
        return self.s_t.shape[0]

    @property
    def deltas(self):
        return self.s_tL - self.s_t

    def subset(self, idx):
        return DynamicsDataset(self.s_t[idx], self.s_tL[idx], self.L)

    def split(self, holdout_fraction, rng):
        """
        Random train / holdout split

        Returns:
            tuple: (train, holdout); holdout is the training set when too small to split
        """
        order = rng.permutation(len(self))
        n_holdout = int(math.floor(holdout_fraction * len(self)))
        if n_holdout == 0 or n_holdout == len(self):
            return self, self
        return self.subset(order[n_holdout:]), self.subset(order[:n_holdout])


def extract_pairs(buffer, partition, L, tail_fraction=0.25):
    """
    Build L-step pairs from the newest part of a replay buffer

    Args:
        buffer (ReplayBuffer): Transitions with episode_id and step_index markers
        partition (ObservationPartition): Selects s^m from observations
        L (int): Prediction time scale in steps
        tail_fraction (float): Share of the buffer, newest first, that is used

    Returns:
        DynamicsDataset: Pairs that never span an episode reset
    """
    if L < 1:
        raise ValueError(f"L must be positive, got {L}")
    if not 0.0 < tail_fraction <= 1.0:
        raise ValueError(f"tail_fraction must lie in (0, 1], got {tail_fraction}")

    count = int(math.ceil(tail_fraction * len(buffer)))
    idx = buffer.chronological()[len(buffer) - count:]
    external = buffer.obs[idx][:, list(partition.external_idx)]
    episodes = buffer.episode_id[idx]
    steps = buffer.step_index[idx]

    # A run continues while the episode is unchanged and step_index advances by one
    breaks = np.flatnonzero((episodes[1:] != episodes[:-1]) | (steps[1:] != steps[:-1] + 1)) + 1
    starts = np.concatenate([[0], breaks])
    ends = np.concatenate([breaks, [len(idx)]])

    first, later = [], []
    for start, end in zip(starts, ends):
        for k in range(start, end - L):
            first.append(k)
            later.append(k + L)
    if not first:
        raise EmptyDatasetError(
            f"no uninterrupted run of {L + 1} steps in the last {count} transitions"
        )

    s_t = external[first]
    s_tL = external[later].copy()
    ang = list(partition.angular_in_external)
    if ang:
        s_tL[:, ang] = s_t[:, ang] + wrap_angles(s_tL[:, ang] - s_t[:, ang])
    return DynamicsDataset(s_t, s_tL, L)


class BehaviorDynamicsModel:
    """
    Predicts s^m_{t+L} = s^m_t + delta(s^m_t) for one behavior

    The network sees only the components of s^m listed in input_idx. Leaving the
    position dims out makes the prediction translation invariant, so a model fitted
    in an open arena transfers to any maze.
    """

    def __init__(self, net, behavior_id, L, input_mean=None, input_std=None, input_idx=None):
        if input_idx is None:
            input_idx = range(net.output_dim)
        self.input_idx = [int(i) for i in input_idx]
        if net.input_dim != len(self.input_idx):
            raise ShapeError(
                f"dynamics net takes {net.input_dim} inputs, {len(self.input_idx)} components selected"
            )
        if any(not 0 <= i < net.output_dim for i in self.input_idx):
            raise ShapeError(f"input components {self.input_idx} outside R^{net.output_dim}")
        self.net = net
        self.behavior_id = behavior_id
        self.L = int(L)
        width = len(self.input_idx)
        self.input_mean = np.zeros(width) if input_mean is None else np.asarray(input_mean, dtype=np.float64)
        self.input_std = np.ones(width) if input_std is None else np.asarray(input_std, dtype=np.float64)

    @classmethod
    def constant(cls, delta, behavior_id=0, L=3):
        """Model whose delta is exactly `delta` everywhere"""
        delta = np.asarray(delta, dtype=np.float64)
        net = Mlp.zeros([delta.shape[0], delta.shape[0]])
        net.biases[0][:] = delta
        return cls(net, behavior_id, L)

    @property
    def dim(self):
        return self.net.output_dim

    @property
    def position_invariant(self):
        return len(self.input_idx) < self.dim

    def _normalize(self, s_m):
        return (s_m[..., self.input_idx] - self.input_mean) / self.input_std

    def delta(self, s_m):
        s_m = np.asarray(s_m, dtype=np.float64)
        if s_m.shape[-1] != self.dim:
            raise ShapeError(f"state has dimension {s_m.shape[-1]}, model expects {self.dim}")
        return self.net.forward(self._normalize(s_m))

    def predict(self, s_m):
        """s^m + delta(s^m); accepts a single state or a batch"""
        s_m = np.asarray(s_m, dtype=np.float64)
        return s_m + self.delta(s_m)

    def to_dict(self):
        return {
            "version": 1,
            "behavior_id": self.behavior_id,
            "L": self.L,
            "input_idx": self.input_idx,
            "input_mean": self.input_mean.tolist(),
            "input_std": self.input_std.tolist(),
            "network": self.net.to_dict(),
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            Mlp.from_dict(data["network"]),
            data["behavior_id"],
            data["L"],
            data.get("input_mean"),
            data.get("input_std"),
            data.get("input_idx"),
        )

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict()), encoding="utf-8")

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def predict(model, s_m):
    return model.predict(s_m)


@dataclass
class FitReport:
    behavior_id: int
    pairs: int
    holdout_pairs: int
    train_mse: float
    holdout_mse: float
    holdout_error: float


def holdout_error(model, dataset):
    """Mean L2 distance between predicted and observed s^m_{t+L}"""
    if len(dataset) == 0:
        raise EmptyDatasetError("holdout split is empty")
    return float(np.mean(np.linalg.norm(model.predict(dataset.s_t) - dataset.s_tL, axis=1)))


def _mse(model, dataset):
    return float(np.mean((model.predict(dataset.s_t) - dataset.s_tL) ** 2))


def fit(dataset, config, behavior_id=0, rng=None, input_idx=None):
    """
    Fit a delta model by minimizing the mean squared L-step error

    Args:
        dataset (DynamicsDataset): Non-empty pairs
        config (DynamicsConfig): Architecture and optimizer settings
        behavior_id (int): Behavior the data came from
        rng (np.random.Generator, optional): Split, init and batch sampling
        input_idx (list[int], optional): Components of s^m the network sees; all by default

    Returns:
        tuple: (BehaviorDynamicsModel, FitReport)
    """
    if len(dataset) == 0:
        raise EmptyDatasetError("cannot fit a dynamics model on an empty dataset")
    rng = rng if rng is not None else np.random.default_rng(behavior_id)
    train, holdout = dataset.split(config.holdout_fraction, rng)
    dim = train.s_t.shape[1]
    input_idx = list(range(dim)) if input_idx is None else [int(i) for i in input_idx]
    selected = train.s_t[:, input_idx]

    if config.standardize:
        mean = selected.mean(axis=0)
        std = selected.std(axis=0)
        std[std < 1e-6] = 1.0
    else:
        mean, std = np.zeros(len(input_idx)), np.ones(len(input_idx))

    net = Mlp(
        [len(input_idx)] + list(config.hidden_sizes) + [dim],
        hidden_activation=config.hidden_activation,
        output_activation=config.output_activation,
        rng=rng,
    )
    model = BehaviorDynamicsModel(net, behavior_id, dataset.L, mean, std, input_idx)
    opt = Optimizer(config.learning_rate)

    inputs = model._normalize(train.s_t)
    targets = train.deltas
    batch = min(config.batch_size, len(train))
    for step_no in range(config.gradient_steps):
        idx = rng.integers(0, len(train), size=batch)
        error = net.forward(inputs[idx]) - targets[idx]
        loss = float(np.mean(error**2))
        if not math.isfinite(loss):
            raise TrainingAborted(f"dynamics loss for behavior {behavior_id} became {loss} at step {step_no}")
        opt.step(net, net.backward(inputs[idx], 2.0 * error / error.size))
        if (step_no + 1) % 500 == 0:
            logger.debug(f"behavior {behavior_id} dynamics step {step_no + 1}: batch mse {loss:.6f}")

    report = FitReport(
        behavior_id=behavior_id,
        pairs=len(train),
        holdout_pairs=len(holdout),
        train_mse=_mse(model, train),
        holdout_mse=_mse(model, holdout),
        holdout_error=holdout_error(model, holdout),
    )
    logger.info(
        f"Fitted dynamics for behavior {behavior_id} (L={dataset.L}): "
        f"train mse {report.train_mse:.6f}, holdout error {report.holdout_error:.4f}"
    )
    return model, report


def fit_library_models(library, config, seed=0, max_workers=None):
    """
    Fit one model per behavior from the replay tails stored with the library

    Returns:
        tuple: (list[BehaviorDynamicsModel] in library order, list[FitReport])
    """
    missing = [b.id for b in library if b.id not in library.replay]
    if missing:
        raise ArtifactError(f"no replay data for behaviors {missing}")

    rngs = spawn_rngs(seed, len(library))
    input_idx = None
    if config.position_invariant:
        # Wall-free training data: the L-step change does not depend on where the body is
        interest = set(library.partition.interest_in_external)
        input_idx = [k for k in range(len(library.partition.external_idx)) if k not in interest]

    def fit_one(args):
        behavior, rng = args
        # Replay buffers already hold only the retained tail
        dataset = extract_pairs(
            library.replay[behavior.id], library.partition, config.prediction_steps, tail_fraction=1.0
        )
        return fit(dataset, config, behavior.id, rng, input_idx)

    with ThreadPoolExecutor(max_workers=worker_count(max_workers)) as pool:
        results = list(pool.map(fit_one, zip(library.behaviors, rngs)))
    return [m for m, _ in results], [r for _, r in results]


def save_models(models, reports, directory):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for model in models:
        model.save(directory / DYNAMICS_FILE.format(id=model.behavior_id))
    report_doc = {"models": [asdict(r) for r in reports]}
    (directory / HOLDOUT_REPORT_FILE).write_text(json.dumps(report_doc, indent=2), encoding="utf-8")
    return directory


def load_models(directory, library):
    """Models in library order; raises ArtifactError when any is missing"""
    directory = Path(directory)
    models = []
    for behavior in library:
        path = directory / DYNAMICS_FILE.format(id=behavior.id)
        if not path.exists():
            raise ArtifactError(f"dynamics model missing: {path}")
        models.append(BehaviorDynamicsModel.load(path))
    return models
