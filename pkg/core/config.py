#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
HierNav - Pipeline Configuration
--------------------------------
Hyperparameters for every level of the hierarchy. Dataclass defaults are the
published values; the bundled config.yaml carries the desk-scale profile.
"""

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from core.constants import BUNDLED_CONFIG
from core.errors import ConfigError
from utils.logger import get_logger

PROFILES = ("paper", "desk")

logger = get_logger("hiernav.config")


@dataclass
class EnvConfig:
    body: str = "crawler"  # crawler | linear_point
    compass: bool = True
    maze: str = "cross"
    dt: float = 0.1
    wheel_radius: float = 0.5
    axle_width: float = 1.0
    drag: float = 0.5
    max_wheel_accel: float = 2.0
    linear_point_max_step: float = 0.25


@dataclass
class BehaviorConfig:
    total_steps: int = 400000
    random_action_steps: int = 100000
    learning_starts: int = 1000
    update_every: int = 50
    max_episode_length: int = 1000
    replay_size: int = 1000000
    batch_size: int = 100
    policy_delay: int = 2
    gamma: float = 0.99
    polyak: float = 0.995
    policy_lr: float = 1e-3
    q_lr: float = 1e-3
    target_noise: float = 0.2
    target_noise_clip: float = 0.5
    action_noise: float = 0.1
    hidden_sizes: list = field(default_factory=lambda: [256, 256])
    hidden_activation: str = "relu"
    policy_output_activation: str = "tanh"
    q_output_activation: str = "identity"
    step_magnitude: float = 0.15
    scripted: bool = False
    eval_rollouts: int = 10
    eval_steps: int = 200


@dataclass
class DynamicsConfig:
    hidden_sizes: list = field(default_factory=lambda: [256, 256])
    hidden_activation: str = "relu"
    output_activation: str = "identity"
    prediction_steps: int = 3
    tail_fraction: float = 0.25
    holdout_fraction: float = 0.1
    batch_size: int = 100
    learning_rate: float = 1e-3
    gradient_steps: int = 2000
    standardize: bool = True
    position_invariant: bool = True
    rollout_steps: int = 20000


@dataclass
class MpcConfig:
    horizon: int = 2
    samples: int = 16
    behavior_prediction_steps: int = 2
    exhaustive_threshold: int = 4096


@dataclass
class GraphConfig:
    interval_x: float = 1.0
    interval_y: float = 1.0
    retry_blocked: bool = False


@dataclass
class RunSettings:
    max_subgoal_steps: int = 100
    success_threshold: float = 0.5
    episode_cap: int = 200000
    seed: int = 0
    benchmark_runs: int = 10
    benchmark_goals: int = 20
    free_space_steps: int = 200
    free_space_extent: float = 15.0


SECTIONS = {
    "env": EnvConfig,
    "behavior": BehaviorConfig,
    "dynamics": DynamicsConfig,
    "mpc": MpcConfig,
    "graph": GraphConfig,
    "run": RunSettings,
}


def _coerce(key, default, value):
    """Convert a parsed value to the type of the field default"""
    try:
        if isinstance(default, bool):
            if not isinstance(value, bool):
                raise TypeError
            return value
        if isinstance(default, int):
            number = float(value) if isinstance(value, str) else value
            if isinstance(number, bool) or int(number) != number:
                raise TypeError
            return int(number)
        if isinstance(default, float):
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        if isinstance(default, list):
            if not isinstance(value, (list, tuple)):
                raise TypeError
            return [int(v) for v in value]
        if isinstance(default, str):
            if not isinstance(value, str):
                raise TypeError
            return value
    except (TypeError, ValueError):
        raise ConfigError(
            f"invalid value for {key}: {value!r} (expected {type(default).__name__})",
            key=key,
        ) from None
    return value


def _build_section(name, cls, values, base=None):
    if not isinstance(values, dict):
        raise ConfigError(f"section {name} must be a mapping", key=name)
    section = base if base is not None else cls()
    known = {f.name for f in fields(cls)}
    for key, value in values.items():
        dotted = f"{name}.{key}"
        if key not in known:
            raise ConfigError(f"unknown configuration key: {dotted}", key=dotted)
        setattr(section, key, _coerce(dotted, getattr(section, key), value))
    return section


@dataclass
class PipelineConfig:
    env: EnvConfig = field(default_factory=EnvConfig)
    behavior: BehaviorConfig = field(default_factory=BehaviorConfig)
    dynamics: DynamicsConfig = field(default_factory=DynamicsConfig)
    mpc: MpcConfig = field(default_factory=MpcConfig)
    graph: GraphConfig = field(default_factory=GraphConfig)
    run: RunSettings = field(default_factory=RunSettings)

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data, base=None):
        """
        Build a configuration from a nested mapping

        Args:
            data (dict): Section name -> {key: value}
            base (PipelineConfig, optional): Values to overlay onto (copied first)

        Returns:
            PipelineConfig: Validated configuration
        """
        config = cls.from_json(base.to_json()) if base is not None else cls()
        if not isinstance(data, dict):
            raise ConfigError("configuration document must be a mapping")
        for name, values in data.items():
            if name not in SECTIONS:
                raise ConfigError(f"unknown configuration section: {name}", key=name)
            _build_section(name, SECTIONS[name], values, base=getattr(config, name))
        config.validate()
        return config

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def validate(self):
        """Raise ConfigError when a value falls outside its allowed range"""
        checks = [
            ("env.body", self.env.body in ("crawler", "linear_point")),
            ("env.dt", self.env.dt > 0),
            ("env.linear_point_max_step", self.env.linear_point_max_step > 0),
            ("behavior.total_steps", self.behavior.total_steps >= 0),
            ("behavior.batch_size", self.behavior.batch_size >= 1),
            ("behavior.update_every", self.behavior.update_every >= 1),
            ("behavior.policy_delay", self.behavior.policy_delay >= 1),
            ("behavior.max_episode_length", self.behavior.max_episode_length >= 1),
            ("behavior.replay_size", self.behavior.replay_size >= 1),
            ("behavior.gamma", 0.0 <= self.behavior.gamma <= 1.0),
            ("behavior.polyak", 0.0 <= self.behavior.polyak <= 1.0),
            ("behavior.hidden_sizes", all(s > 0 for s in self.behavior.hidden_sizes)),
            ("behavior.step_magnitude", self.behavior.step_magnitude > 0),
            ("dynamics.prediction_steps", self.dynamics.prediction_steps >= 1),
            ("dynamics.tail_fraction", 0.0 < self.dynamics.tail_fraction <= 1.0),
            ("dynamics.holdout_fraction", 0.0 <= self.dynamics.holdout_fraction < 1.0),
            ("dynamics.hidden_sizes", all(s > 0 for s in self.dynamics.hidden_sizes)),
            ("dynamics.batch_size", self.dynamics.batch_size >= 1),
            ("mpc.horizon", self.mpc.horizon >= 1),
            ("mpc.samples", self.mpc.samples >= 1),
            (
                "mpc.behavior_prediction_steps",
                self.mpc.behavior_prediction_steps == self.mpc.horizon,
            ),
            ("graph.interval_x", self.graph.interval_x > 0),
            ("graph.interval_y", self.graph.interval_y > 0),
            ("run.max_subgoal_steps", self.run.max_subgoal_steps >= 1),
            (
                "run.success_threshold",
                0.0
                < self.run.success_threshold
                < min(self.graph.interval_x, self.graph.interval_y),
            ),
            ("run.episode_cap", self.run.episode_cap >= 1),
            ("run.benchmark_runs", self.run.benchmark_runs >= 1),
        ]
        for key, ok in checks:
            if not ok:
                section, name = key.split(".")
                value = getattr(getattr(self, section), name)
                raise ConfigError(f"invalid value for {key}: {value!r}", key=key)
        return self


def _read_document(path):
    """Read a YAML or JSON document (PyYAML parses both)"""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"configuration file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            return yaml.safe_load(f) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"cannot parse {path}: {e}") from e


def load_config(profile="desk", path=None, bundled=BUNDLED_CONFIG):
    """
    Load the pipeline configuration

    Args:
        profile (str): "paper" (dataclass defaults) or "desk" (bundled overrides)
        path (str | Path, optional): User file overlaid on the profile
        bundled (Path): Location of the bundled profile file

    Returns:
        PipelineConfig: Validated configuration
    """
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile: {profile}", key="profile")

    config = PipelineConfig()
    if profile != "paper":
        document = _read_document(bundled)
        overrides = (document.get("profiles") or {}).get(profile)
        if overrides is None:
            raise ConfigError(f"profile {profile} missing from {bundled}", key=profile)
        config = PipelineConfig.from_dict(overrides, base=config)
        logger.debug(f"Applied {profile} profile from {bundled}")

    if path is not None:
        config = PipelineConfig.from_dict(_read_document(path), base=config)
        logger.info(f"Configuration loaded from {path} over the {profile} profile")

    return config
