#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
HierNav - Behavior Library
--------------------------
Low level of the hierarchy: directional behaviors learned with twin-critic
delayed actor-critic updates, scripted controllers for tests, replay storage
"""

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from core.constants import BEHAVIOR_FILE, LIBRARY_FILE, REPLAY_FILE
from core.crawler import CrawlerParams, ObservationPartition
from core.errors import ArtifactError, NumericError, ShapeError, TrainingAborted
from core.nncore import Mlp, Optimizer, polyak_update
from utils.helper import as_vector, spawn_rngs, worker_count
from utils.logger import get_logger

logger = get_logger("hiernav.behavior")

# Steer-then-drive controller gains
STEER_GAIN = 2.0
WHEEL_TRACKING_GAIN = 5.0


@dataclass(frozen=True)
class BehaviorSpec:
    """Desired per-step change of the interest dims"""

    id: int
    v: tuple

    def __post_init__(self):
        object.__setattr__(self, "v", tuple(float(c) for c in self.v))
        if not all(math.isfinite(c) for c in self.v):
            raise NumericError(f"behavior {self.id} has a non-finite v: {self.v}")

    @property
    def vector(self):
        return np.array(self.v)


def default_specs(magnitude):
    """The four cardinal directions: +x, -x, +y, -y"""
    return [
        BehaviorSpec(0, (magnitude, 0.0)),
        BehaviorSpec(1, (-magnitude, 0.0)),
        BehaviorSpec(2, (0.0, magnitude)),
        BehaviorSpec(3, (0.0, -magnitude)),
    ]


def check_specs(specs):
    if not specs:
        raise ValueError("behavior library needs at least one spec")
    seen = set()
    for spec in specs:
        if spec.v in seen:
            raise ValueError(f"duplicate behavior vector {spec.v}")
        seen.add(spec.v)
    if len({s.id for s in specs}) != len(specs):
        raise ValueError("behavior ids must be unique")


def behavior_reward(s_m_t, s_m_t1, v):
    """
    Directional reward: 1 - |(s_t1 - s_t) - v|_1

    Args:
        s_m_t (array-like): Monitored state before the step
        s_m_t1 (array-like): Monitored state after the step
        v (array-like): Desired change

    Returns:
        float: Reward, never above 1
    """
    s_t = as_vector(s_m_t, name="s_m_t")
    s_t1 = as_vector(s_m_t1, len(s_t), "s_m_t1")
    v = as_vector(v, len(s_t), "v")
    return 1.0 - float(np.abs((s_t1 - s_t) - v).sum())


def batch_rewards(s_t, s_t1, v):
    return 1.0 - np.abs((s_t1 - s_t) - v).sum(axis=-1)


class ReplayBuffer:
    """Ring buffer of transitions with episode markers"""

    def __init__(self, capacity, obs_dim, action_dim):
        if capacity < 1:
            raise ValueError(f"capacity must be positive, got {capacity}")
        self.capacity = int(capacity)
        self.obs_dim = obs_dim
        self.action_dim = action_dim
        self.obs = np.zeros((self.capacity, obs_dim))
        self.actions = np.zeros((self.capacity, action_dim))
        self.next_obs = np.zeros((self.capacity, obs_dim))
        self.rewards = np.zeros(self.capacity)
        self.step_index = np.zeros(self.capacity, dtype=np.int64)
        self.episode_id = np.zeros(self.capacity, dtype=np.int64)
        self._next = 0
        self.size = 0

    def __len__(self):
        return self.size

    def add(self, transition, reward=0.0):
        i = self._next
        self.obs[i] = transition.obs_t
        self.actions[i] = transition.action
        self.next_obs[i] = transition.obs_t1
        self.rewards[i] = reward
        self.step_index[i] = transition.step_index
        self.episode_id[i] = transition.episode_id
        self._next = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size, rng):
        """Uniform sample with replacement over the stored items"""
        if self.size == 0:
            raise ValueError("cannot sample from an empty replay buffer")
        idx = rng.integers(0, self.size, size=batch_size)
        return {
            "obs": self.obs[idx],
            "actions": self.actions[idx],
            "next_obs": self.next_obs[idx],
            "rewards": self.rewards[idx],
        }

    def chronological(self):
        """Storage indices from oldest to newest"""
        if self.size < self.capacity:
            return np.arange(self.size)
        return (np.arange(self.capacity) + self._next) % self.capacity

    def tail(self, fraction):
        """Newest ceil(fraction * size) items as a new buffer, in insertion order"""
        count = int(math.ceil(fraction * self.size))
        idx = self.chronological()[self.size - count:]
        out = ReplayBuffer(max(count, 1), self.obs_dim, self.action_dim)
        for name in ("obs", "actions", "next_obs", "rewards", "step_index", "episode_id"):
            getattr(out, name)[:count] = getattr(self, name)[idx]
        out.size = count
        out._next = count % out.capacity
        return out

    def save(self, path):
        idx = self.chronological()
        np.savez_compressed(
            path,
            obs=self.obs[idx],
            actions=self.actions[idx],
            next_obs=self.next_obs[idx],
            rewards=self.rewards[idx],
            step_index=self.step_index[idx],
            episode_id=self.episode_id[idx],
        )

    @classmethod
    def load(cls, path):
        with np.load(path) as data:
            count = data["obs"].shape[0]
            buf = cls(max(count, 1), data["obs"].shape[1], data["actions"].shape[1])
            for name in ("obs", "actions", "next_obs", "rewards", "step_index", "episode_id"):
                getattr(buf, name)[:count] = data[name]
        buf.size = count
        buf._next = count % buf.capacity
        return buf


class Behavior:
    """Deterministic learned policy over proprioceptive inputs"""

    kind = "learned"

    def __init__(self, policy_net, spec, proprio_idx):
        self.policy_net = policy_net
        self.spec = spec
        self.proprio_idx = tuple(proprio_idx)
        if policy_net.input_dim != len(self.proprio_idx):
            raise ShapeError(
                f"policy input {policy_net.input_dim} != proprio dim {len(self.proprio_idx)}"
            )

    @property
    def id(self):
        return self.spec.id

    @property
    def action_dim(self):
        return self.policy_net.output_dim

    def act(self, s_l):
        s_l = as_vector(s_l, len(self.proprio_idx), "s_l")
        return np.clip(self.policy_net.forward(s_l), -1.0, 1.0)

    def to_dict(self):
        return {"kind": self.kind, "network": self.policy_net.to_dict()}


class ConstantActionBehavior:
    """Scripted LinearPoint behavior: the action that moves exactly v per step"""

    kind = "constant"

    def __init__(self, spec, max_step, action_dim=2):
        self.spec = spec
        self.max_step = float(max_step)
        self.proprio_idx = ()
        self._action = np.clip(spec.vector / self.max_step, -1.0, 1.0)
        if self._action.shape[0] != action_dim:
            raise ShapeError(f"v has {len(spec.v)} components, action needs {action_dim}")

    @property
    def id(self):
        return self.spec.id

    @property
    def action_dim(self):
        return self._action.shape[0]

    def act(self, s_l):
        as_vector(s_l, 0, "s_l")
        return self._action.copy()

    def to_dict(self):
        return {"kind": self.kind, "max_step": self.max_step}


class SteerDriveBehavior:
    """
    Scripted Crawler behavior: turn toward the direction of v, then drive at |v|/dt

    Needs the compass channels in s_l = (w_L, w_R, cos phi, sin phi).
    """

    kind = "steer"

    def __init__(self, spec, params=None):
        self.spec = spec
        self.params = params or CrawlerParams()
        self.proprio_idx = (0, 1, 5, 6)
        self.heading = math.atan2(spec.v[1], spec.v[0])
        self.speed = math.hypot(*spec.v) / self.params.dt
        if self.speed > self.params.max_speed:
            raise ValueError(
                f"behavior {spec.id} asks for {self.speed:.2f} m/s, body max is "
                f"{self.params.max_speed:.2f} m/s"
            )

    @property
    def id(self):
        return self.spec.id

    @property
    def action_dim(self):
        return 2

    def act(self, s_l):
        s_l = as_vector(s_l, 4, "s_l (steering needs the compass channels)")
        p = self.params
        w = s_l[:2]
        phi = math.atan2(s_l[3], s_l[2])
        error = math.remainder(self.heading - phi, 2.0 * math.pi)

        speed = self.speed * max(0.0, math.cos(error))
        sum_w = 2.0 * speed / p.wheel_radius
        turn_limit = max(0.0, p.max_wheel_speed - sum_w / 2.0)
        turn = float(np.clip(STEER_GAIN * error, -turn_limit, turn_limit))
        diff_w = turn * p.axle_width / p.wheel_radius
        desired = np.array([(sum_w - diff_w) / 2.0, (sum_w + diff_w) / 2.0])

        accel = p.drag * desired + WHEEL_TRACKING_GAIN * (desired - w)
        return np.clip(accel / p.max_wheel_accel, -1.0, 1.0)

    def to_dict(self):
        return {"kind": self.kind, "params": asdict(self.params)}


def act(behavior, s_l):
    """Execution-time action: deterministic, no noise"""
    return behavior.act(s_l)


def make_scripted(spec, env):
    if env.body == "linear_point":
        return ConstantActionBehavior(spec, env.max_step, env.action_dim)
    if not env.compass:
        raise ShapeError("scripted Crawler behaviors need env.compass = true")
    return SteerDriveBehavior(spec, env.params)


def compute_critic_targets(rewards, next_s_l, actor_target, q1_target, q2_target, gamma, noise):
    """
    Clipped double-Q targets: r + gamma * min(Q1'(s', a'), Q2'(s', a'))

    Args:
        rewards (np.ndarray): (B,)
        next_s_l (np.ndarray): (B, |s_l|)
        actor_target (Mlp): Target policy
        q1_target (Mlp): First target critic
        q2_target (Mlp): Second target critic
        gamma (float): Discount
        noise (np.ndarray): (B, action_dim) clipped smoothing noise

    Returns:
        np.ndarray: (B,) targets
    """
    next_actions = np.clip(actor_target.forward(next_s_l) + noise, -1.0, 1.0)
    q_in = np.concatenate([next_s_l, next_actions], axis=1)
    q_min = np.minimum(q1_target.forward(q_in)[:, 0], q2_target.forward(q_in)[:, 0])
    return rewards + gamma * q_min


class Td3Learner:
    """Twin critics, target smoothing and delayed policy updates"""

    def __init__(self, proprio_dim, action_dim, config, rng):
        self.config = config
        self.rng = rng
        self.proprio_dim = proprio_dim
        hidden = list(config.hidden_sizes)

        self.actor = Mlp(
            [proprio_dim] + hidden + [action_dim],
            hidden_activation=config.hidden_activation,
            output_activation=config.policy_output_activation,
            rng=rng,
        )
        critic_sizes = [proprio_dim + action_dim] + hidden + [1]
        self.q1 = Mlp(critic_sizes, config.hidden_activation, config.q_output_activation, rng=rng)
        self.q2 = Mlp(critic_sizes, config.hidden_activation, config.q_output_activation, rng=rng)

        self.actor_target = self.actor.copy()
        self.q1_target = self.q1.copy()
        self.q2_target = self.q2.copy()

        self.actor_opt = Optimizer(config.policy_lr)
        self.q1_opt = Optimizer(config.q_lr)
        self.q2_opt = Optimizer(config.q_lr)
        self.updates = 0
        self.last_critic_loss = float("nan")
        self.last_policy_loss = float("nan")

    def exploration_action(self, s_l):
        a = self.actor.forward(s_l)
        a = a + self.rng.normal(0.0, self.config.action_noise, size=a.shape)
        return np.clip(a, -1.0, 1.0)

    def update(self, s_l, actions, rewards, next_s_l):
        cfg = self.config
        batch = s_l.shape[0]

        noise = np.clip(
            self.rng.normal(0.0, cfg.target_noise, size=actions.shape),
            -cfg.target_noise_clip,
            cfg.target_noise_clip,
        )
        targets = compute_critic_targets(
            rewards, next_s_l, self.actor_target, self.q1_target, self.q2_target, cfg.gamma, noise
        )

        q_in = np.concatenate([s_l, actions], axis=1)
        critic_loss = 0.0
        for q, opt in ((self.q1, self.q1_opt), (self.q2, self.q2_opt)):
            error = q.forward(q_in)[:, 0] - targets
            critic_loss += float(np.mean(error**2))
            grads = q.backward(q_in, (2.0 / batch) * error[:, None])
            opt.step(q, grads)
        if not math.isfinite(critic_loss):
            raise TrainingAborted(f"critic loss became {critic_loss} after {self.updates} updates")
        self.last_critic_loss = critic_loss

        self.updates += 1
        if self.updates % cfg.policy_delay:
            return

        # Deterministic policy gradient through Q1
        pi = self.actor.forward(s_l)
        pi_in = np.concatenate([s_l, pi], axis=1)
        q_values = self.q1.forward(pi_in)[:, 0]
        dq_da = self.q1.backward(pi_in, np.full((batch, 1), -1.0 / batch)).inputs[:, self.proprio_dim:]
        self.actor_opt.step(self.actor, self.actor.backward(s_l, dq_da))
        self.last_policy_loss = -float(np.mean(q_values))
        if not math.isfinite(self.last_policy_loss):
            raise TrainingAborted(f"policy loss became non-finite after {self.updates} updates")

        polyak_update(self.actor_target, self.actor, cfg.polyak)
        polyak_update(self.q1_target, self.q1, cfg.polyak)
        polyak_update(self.q2_target, self.q2, cfg.polyak)


def train_behavior(env, spec, config, rng=None):
    """
    Learn one behavior with the directional reward

    Args:
        env: Environment (CrawlerEnv or LinearPointEnv); episodes start from random poses
        spec (BehaviorSpec): Target per-step change over the interest dims
        config (BehaviorConfig): Learning hyperparameters
        rng (np.random.Generator, optional): Stream for initialization and noise

    Returns:
        tuple: (Behavior, ReplayBuffer of everything stored, list of episode returns)
    """
    rng = rng if rng is not None else np.random.default_rng(spec.id)
    part = env.partition
    if len(spec.v) != len(part.interest_idx):
        raise ShapeError(f"v has {len(spec.v)} components, interest dims are {len(part.interest_idx)}")

    learner = Td3Learner(len(part.proprio_idx), env.action_dim, config, rng)
    buffer = ReplayBuffer(min(config.replay_size, max(config.total_steps, 1)), env.obs_dim, env.action_dim)
    v = spec.vector
    proprio = list(part.proprio_idx)
    interest = list(part.interest_idx)

    returns = []
    episode_return = 0.0
    episode_len = 0
    obs = env.reset()
    for t in range(config.total_steps):
        if t < config.random_action_steps:
            action = rng.uniform(-1.0, 1.0, size=env.action_dim)
        else:
            action = learner.exploration_action(obs[proprio])
        transition = env.step(action)
        reward = behavior_reward(obs[interest], transition.obs_t1[interest], v)
        buffer.add(transition, reward)
        episode_return += reward
        episode_len += 1
        obs = transition.obs_t1

        if episode_len >= config.max_episode_length:
            returns.append(episode_return)
            logger.debug(f"behavior {spec.id} episode {len(returns)}: return {episode_return:.2f}")
            if len(returns) % 10 == 0:
                logger.info(
                    f"behavior {spec.id}: step {t + 1}/{config.total_steps}, "
                    f"mean return {np.mean(returns[-10:]):.2f}, "
                    f"critic loss {learner.last_critic_loss:.4f}"
                )
            episode_return = 0.0
            episode_len = 0
            obs = env.reset()

        if t + 1 >= config.learning_starts and (t + 1) % config.update_every == 0:
            for _ in range(config.update_every):
                batch = buffer.sample(config.batch_size, rng)
                learner.update(
                    batch["obs"][:, proprio],
                    batch["actions"],
                    batch_rewards(batch["obs"][:, interest], batch["next_obs"][:, interest], v),
                    batch["next_obs"][:, proprio],
                )

    behavior = Behavior(learner.actor, spec, part.proprio_idx)
    return behavior, buffer, returns


def collect_rollouts(env, behavior, steps, episode_length, capacity=None):
    """
    Execute a behavior from random poses and store what happened

    Args:
        env: Environment instance
        behavior: Any behavior (learned or scripted)
        steps (int): Total environment steps
        episode_length (int): Steps before a reset
        capacity (int, optional): Buffer capacity, defaults to steps

    Returns:
        ReplayBuffer: Transitions with episode markers and rewards
    """
    part = env.partition
    proprio = list(part.proprio_idx)
    interest = list(part.interest_idx)
    buffer = ReplayBuffer(capacity or max(steps, 1), env.obs_dim, env.action_dim)
    obs = env.reset()
    episode_len = 0
    for _ in range(steps):
        transition = env.step(behavior.act(obs[proprio]))
        reward = behavior_reward(obs[interest], transition.obs_t1[interest], behavior.spec.v)
        buffer.add(transition, reward)
        obs = transition.obs_t1
        episode_len += 1
        if episode_len >= episode_length:
            obs = env.reset()
            episode_len = 0
    return buffer


@dataclass
class BehaviorEvaluation:
    behavior_id: int
    mean_displacement: np.ndarray
    cosine: float

    def __str__(self):
        dx = ", ".join(f"{c:+.3f}" for c in self.mean_displacement)
        return f"behavior {self.behavior_id}: mean step ({dx}), cosine {self.cosine:.3f}"


def evaluate_behavior(env, behavior, rollouts=10, steps=200):
    """
    Mean per-step displacement over the interest dims and its alignment with v

    Returns:
        BehaviorEvaluation: Averages over `rollouts` episodes of `steps` steps
    """
    part = env.partition
    proprio = list(part.proprio_idx)
    interest = list(part.interest_idx)
    displacements = []
    for _ in range(rollouts):
        obs = env.reset()
        start = obs[interest].copy()
        for _ in range(steps):
            obs = env.step(behavior.act(obs[proprio])).obs_t1
        displacements.append((obs[interest] - start) / steps)
    mean = np.mean(displacements, axis=0)
    v = behavior.spec.vector
    norms = np.linalg.norm(mean) * np.linalg.norm(v)
    cosine = float(mean @ v / norms) if norms > 0 else 0.0
    return BehaviorEvaluation(behavior.spec.id, mean, cosine)


class BehaviorLibrary:
    """Ordered set of behaviors, the discrete action space of the middle level"""

    def __init__(self, behaviors, partition, body, replay=None, env_info=None):
        check_specs([b.spec for b in behaviors])
        self.behaviors = list(behaviors)
        self.partition = partition
        self.body = body
        self.replay = dict(replay or {})
        self.env_info = dict(env_info or {})

    def __len__(self):
        return len(self.behaviors)

    def __getitem__(self, index):
        return self.behaviors[index]

    def __iter__(self):
        return iter(self.behaviors)

    @property
    def specs(self):
        return [b.spec for b in self.behaviors]

    def save(self, directory):
        """
        Write library.json, one behavior_<id>.json per behavior and replay_<id>.npz tails
        """
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        entries = []
        for b in self.behaviors:
            filename = BEHAVIOR_FILE.format(id=b.id)
            (directory / filename).write_text(json.dumps(b.to_dict()), encoding="utf-8")
            entry = {"id": b.id, "v": list(b.spec.v), "kind": b.kind, "file": filename}
            if b.id in self.replay:
                replay_name = REPLAY_FILE.format(id=b.id)
                self.replay[b.id].save(directory / replay_name)
                entry["replay"] = replay_name
            entries.append(entry)

        document = {
            "version": 1,
            "body": self.body,
            "env": self.env_info,
            "partition": {
                "obs_dim": self.partition.obs_dim,
                "proprio_idx": list(self.partition.proprio_idx),
                "external_idx": list(self.partition.external_idx),
                "interest_idx": list(self.partition.interest_idx),
                "angular_idx": list(self.partition.angular_idx),
            },
            "behaviors": entries,
        }
        (directory / LIBRARY_FILE).write_text(json.dumps(document, indent=2), encoding="utf-8")
        logger.info(f"Saved behavior library ({len(self)} behaviors) to {directory}")
        return directory

    @classmethod
    def load(cls, directory):
        directory = Path(directory)
        index_path = directory / LIBRARY_FILE
        if not index_path.exists():
            raise ArtifactError(f"no behavior library at {directory} ({LIBRARY_FILE} missing)")
        document = json.loads(index_path.read_text(encoding="utf-8"))
        p = document["partition"]
        partition = ObservationPartition(
            obs_dim=p["obs_dim"],
            proprio_idx=tuple(p["proprio_idx"]),
            external_idx=tuple(p["external_idx"]),
            interest_idx=tuple(p["interest_idx"]),
            angular_idx=tuple(p.get("angular_idx", ())),
        )

        behaviors = []
        replay = {}
        for entry in document["behaviors"]:
            spec = BehaviorSpec(entry["id"], tuple(entry["v"]))
            path = directory / entry["file"]
            if not path.exists():
                raise ArtifactError(f"behavior file missing: {path}")
            data = json.loads(path.read_text(encoding="utf-8"))
            if data["kind"] == "learned":
                behaviors.append(Behavior(Mlp.from_dict(data["network"]), spec, partition.proprio_idx))
            elif data["kind"] == "constant":
                behaviors.append(ConstantActionBehavior(spec, data["max_step"]))
            else:
                behaviors.append(SteerDriveBehavior(spec, CrawlerParams(**data["params"])))
            if "replay" in entry and (directory / entry["replay"]).exists():
                replay[spec.id] = ReplayBuffer.load(directory / entry["replay"])
        return cls(behaviors, partition, document["body"], replay, document.get("env"))


def build_library(env_factory, specs, config, seed=0, scripted=False, tail_fraction=0.25, max_workers=None):
    """
    Train (or script) one behavior per spec

    Args:
        env_factory (Callable): rng -> fresh environment instance
        specs (list[BehaviorSpec]): Non-empty, pairwise distinct v
        config (BehaviorConfig): Learning hyperparameters
        seed (int): Root seed; each behavior gets its own child stream
        scripted (bool): Use hand-written controllers instead of learning
        tail_fraction (float): Share of each replay buffer retained for dynamics fitting
        max_workers (int, optional): Parallel trainings, capped by HIERNAV_THREADS

    Returns:
        BehaviorLibrary: Behaviors in spec order
    """
    check_specs(specs)
    rngs = spawn_rngs(seed, len(specs))
    template = env_factory(np.random.default_rng(seed))
    env_info = {"body": template.body, "compass": getattr(template, "compass", False)}

    if scripted:
        behaviors = [make_scripted(spec, template) for spec in specs]
        logger.info(f"Built {len(behaviors)} scripted {template.body} behaviors")
        return BehaviorLibrary(behaviors, template.partition, template.body, env_info=env_info)

    def train_one(args):
        spec, rng = args
        env = env_factory(rng)
        behavior, buffer, returns = train_behavior(env, spec, config, rng)
        final = f"{np.mean(returns[-10:]):.2f}" if returns else "n/a"
        logger.info(f"Trained behavior {spec.id} v={spec.v}: final mean return {final}")
        return behavior, buffer.tail(tail_fraction) if len(buffer) else None

    with ThreadPoolExecutor(max_workers=worker_count(max_workers)) as pool:
        results = list(pool.map(train_one, zip(specs, rngs)))

    behaviors = [b for b, _ in results]
    replay = {b.id: buf for b, buf in results if buf is not None}
    return BehaviorLibrary(behaviors, template.partition, template.body, replay, env_info)
