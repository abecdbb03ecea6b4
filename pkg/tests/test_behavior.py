#!/usr/bin/env python
# -*- coding: utf-8 -*-

import numpy as np
import pytest

from core.behavior import (
    BehaviorLibrary,
    BehaviorSpec,
    ConstantActionBehavior,
    ReplayBuffer,
    SteerDriveBehavior,
    batch_rewards,
    behavior_reward,
    build_library,
    check_specs,
    collect_rollouts,
    compute_critic_targets,
    default_specs,
    evaluate_behavior,
    make_scripted,
    train_behavior,
)
from core.config import BehaviorConfig
from core.crawler import CrawlerEnv, LinearPointEnv, Transition
from core.errors import ArtifactError, NumericError, ShapeError
from core.nncore import Mlp


@pytest.mark.parametrize(
    "s_t, s_t1, v, expected",
    [
        ((0.0, 0.0), (0.15, 0.0), (0.15, 0.0), 1.0),
        ((0.0, 0.0), (0.0, 0.0), (0.15, 0.0), 0.85),
        ((1.0, 1.0), (1.1, 1.05), (0.15, 0.0), 0.9),
        ((0.0, 0.0), (-0.15, 0.0), (0.15, 0.0), 0.7),
    ],
)
def test_behavior_reward(s_t, s_t1, v, expected):
    assert behavior_reward(s_t, s_t1, v) == pytest.approx(expected)


@pytest.mark.parametrize(
    "s_t1, expected",
    [((1.0, 0.0), 1.0), ((0.0, 0.0), 0.0), ((-1.0, 1.0), -2.0)],
)
def test_unit_step_reward_examples(s_t1, expected):
    assert abs(behavior_reward((0.0, 0.0), s_t1, (1.0, 0.0)) - expected) < 1e-12


def test_reward_peaks_at_the_desired_change(rng):
    s_t = rng.normal(size=(200, 3)) * 5
    v = rng.normal(size=3)
    exact = batch_rewards(s_t, s_t + v, v)
    np.testing.assert_allclose(exact, 1.0, atol=1e-12)
    s_t1 = s_t + rng.normal(size=(200, 3))
    rewards = batch_rewards(s_t, s_t1, v)
    assert np.all(rewards <= 1.0)
    for k in range(0, 200, 40):
        assert behavior_reward(s_t[k], s_t1[k], v) == pytest.approx(rewards[k], abs=1e-12)


def test_behavior_reward_checks_dimensions():
    with pytest.raises(ShapeError):
        behavior_reward((0.0, 0.0), (0.0, 0.0, 0.0), (0.1, 0.0))


def test_spec_validation():
    with pytest.raises(NumericError):
        BehaviorSpec(0, (float("nan"), 0.0))
    with pytest.raises(ValueError):
        check_specs([BehaviorSpec(0, (0.1, 0.0)), BehaviorSpec(1, (0.1, 0.0))])
    with pytest.raises(ValueError):
        check_specs([])
    check_specs(default_specs(0.15))


def test_critic_targets_take_min_of_twin_critics():
    actor = Mlp.zeros([1, 2], output_activation="tanh")
    q1 = Mlp.zeros([3, 1])
    q1.biases[0][:] = 2.0
    q2 = Mlp.zeros([3, 1])
    q2.biases[0][:] = 1.0
    q2.weights[0][0, 1] = 1.0  # Q2 = 1 + a_0
    rewards = np.array([0.5, 0.5, -1.0])
    next_s = np.zeros((3, 1))
    noise = np.array([[0.3, 0.0], [5.0, 0.0], [0.0, 0.0]])
    targets = compute_critic_targets(rewards, next_s, actor, q1, q2, 0.9, noise)
    # The noisy action is clipped to [-1, 1] before entering the critics
    np.testing.assert_allclose(targets, [0.5 + 0.9 * 1.3, 0.5 + 0.9 * 2.0, -1.0 + 0.9 * 1.0])


def make_transition(step_index, episode_id=0):
    return Transition(
        obs_t=np.array([step_index, 0.0]),
        action=np.zeros(2),
        obs_t1=np.array([step_index + 1.0, 0.0]),
        step_index=step_index,
        episode_id=episode_id,
    )


def test_replay_buffer_overwrites_oldest():
    buf = ReplayBuffer(3, 2, 2)
    for k in range(5):
        buf.add(make_transition(k), reward=float(k))
    assert len(buf) == 3
    np.testing.assert_array_equal(buf.step_index[buf.chronological()], [2, 3, 4])
    tail = buf.tail(0.5)
    assert len(tail) == 2
    np.testing.assert_array_equal(tail.step_index[tail.chronological()], [3, 4])
    batch = buf.sample(10, np.random.default_rng(0))
    assert batch["obs"].shape == (10, 2)
    assert set(batch["rewards"]) <= {2.0, 3.0, 4.0}


def test_replay_buffer_save_keeps_order(tmp_path):
    buf = ReplayBuffer(4, 2, 2)
    for k in range(6):
        buf.add(make_transition(k, episode_id=k // 3))
    buf.save(tmp_path / "replay.npz")
    again = ReplayBuffer.load(tmp_path / "replay.npz")
    np.testing.assert_array_equal(again.step_index[again.chronological()], [2, 3, 4, 5])
    np.testing.assert_array_equal(again.episode_id[again.chronological()], [0, 1, 1, 1])


def test_empty_replay_buffer_cannot_sample():
    with pytest.raises(ValueError):
        ReplayBuffer(2, 2, 2).sample(1, np.random.default_rng(0))


def test_constant_action_behavior_moves_exactly_v():
    env = LinearPointEnv(max_step=0.25, seed=0)
    for spec in default_specs(0.2):
        result = evaluate_behavior(env, ConstantActionBehavior(spec, 0.25), rollouts=2, steps=20)
        np.testing.assert_allclose(result.mean_displacement, spec.v, atol=1e-12)
        assert result.cosine == pytest.approx(1.0)


def test_steer_drive_behavior_follows_direction():
    env = CrawlerEnv(compass=True, seed=1)
    for spec in default_specs(0.15):
        result = evaluate_behavior(env, make_scripted(spec, env), rollouts=3, steps=200)
        assert result.cosine > 0.8, str(result)


def test_steer_drive_rejects_unreachable_speed():
    with pytest.raises(ValueError):
        SteerDriveBehavior(BehaviorSpec(0, (0.5, 0.0)))


def test_scripted_crawler_needs_compass():
    with pytest.raises(ShapeError):
        make_scripted(BehaviorSpec(0, (0.1, 0.0)), CrawlerEnv(compass=False))


def test_collect_rollouts_marks_episodes():
    env = LinearPointEnv(max_step=0.25, seed=0)
    behavior = ConstantActionBehavior(BehaviorSpec(0, (0.25, 0.0)), 0.25)
    buf = collect_rollouts(env, behavior, steps=25, episode_length=10)
    assert len(buf) == 25
    np.testing.assert_array_equal(buf.episode_id[:25], [0] * 10 + [1] * 10 + [2] * 5)
    np.testing.assert_array_equal(buf.step_index[10:13], [0, 1, 2])
    np.testing.assert_allclose(buf.rewards[:25], 1.0)


def test_build_scripted_library_and_round_trip(tmp_path):
    def env_factory(rng):
        return LinearPointEnv(max_step=0.25, rng=rng)

    library = build_library(env_factory, default_specs(0.25), BehaviorConfig(), seed=0, scripted=True)
    assert len(library) == 4
    assert library.body == "linear_point"
    assert library.env_info == {"body": "linear_point", "compass": False}

    env = env_factory(np.random.default_rng(0))
    library.replay = {b.id: collect_rollouts(env, b, 30, 10) for b in library}
    library.save(tmp_path / "lib")
    again = BehaviorLibrary.load(tmp_path / "lib")
    assert [b.spec for b in again] == [b.spec for b in library]
    assert again.partition == library.partition
    for original, loaded in zip(library, again):
        np.testing.assert_array_equal(original.act(np.zeros(0)), loaded.act(np.zeros(0)))
        assert len(again.replay[loaded.id]) == 30


def test_library_load_missing_directory(tmp_path):
    with pytest.raises(ArtifactError):
        BehaviorLibrary.load(tmp_path / "nothing")


def test_training_rejects_mismatched_spec():
    env = LinearPointEnv(seed=0)
    with pytest.raises(ShapeError):
        train_behavior(env, BehaviorSpec(0, (0.1, 0.0, 0.0)), BehaviorConfig(total_steps=1))


def test_short_training_produces_usable_policy():
    env = LinearPointEnv(max_step=0.25, seed=0)
    config = BehaviorConfig(
        total_steps=200,
        random_action_steps=100,
        learning_starts=50,
        update_every=50,
        max_episode_length=40,
        batch_size=16,
        hidden_sizes=[8, 8],
    )
    behavior, buffer, returns = train_behavior(env, BehaviorSpec(0, (0.2, 0.0)), config, np.random.default_rng(0))
    assert len(buffer) == 200
    assert len(returns) == 5
    action = behavior.act(np.zeros(0))
    assert action.shape == (2,)
    assert np.all(np.abs(action) <= 1.0)


@pytest.mark.slow
def test_learned_behavior_moves_in_its_direction():
    env = LinearPointEnv(max_step=0.25, seed=0)
    config = BehaviorConfig(
        total_steps=4000,
        random_action_steps=500,
        learning_starts=200,
        update_every=50,
        max_episode_length=50,
        batch_size=64,
        hidden_sizes=[32, 32],
    )
    spec = BehaviorSpec(0, (0.2, 0.0))
    behavior, _, _ = train_behavior(env, spec, config, np.random.default_rng(0))
    result = evaluate_behavior(env, behavior, rollouts=3, steps=50)
    assert result.cosine > 0.8, str(result)


@pytest.mark.slow
def test_learned_crawler_behaviors_move_along_v():
    config = BehaviorConfig(
        total_steps=40000,
        random_action_steps=1000,
        max_episode_length=500,
        replay_size=40000,
        hidden_sizes=[64, 64],
    )
    specs = default_specs(config.step_magnitude)

    def env_factory(rng):
        return CrawlerEnv(compass=True, rng=rng)

    library = build_library(env_factory, specs, config, seed=0)
    for behavior in library:
        env = env_factory(np.random.default_rng(behavior.id + 100))
        result = evaluate_behavior(env, behavior, rollouts=10, steps=200)
        assert result.cosine > 0.8, str(result)
        assert np.linalg.norm(result.mean_displacement) > 0.5 * config.step_magnitude, str(result)
