"""Unit tests for the environments and offline data generation."""

import numpy as np
import pytest

from lab.envs import (
    GOAL_REWARD,
    STEP_REWARD,
    BehaviorTier,
    Dataset,
    EnvSpec,
    EpisodeMixture,
    Origin,
    Stepper,
    Transition,
    build_env,
    episode_returns,
    generate_offline_dataset,
    load_dataset,
    make_behavior_policy,
    save_dataset,
)
from lab.errors import ConfigError, EmptyDatasetError
from lab.mdp_core import Policy


def test_gridworld_layout():
    mdp, _ = build_env(EnvSpec("gridworld", 3, 0.0, 10, 0.9))
    assert (mdp.num_states, mdp.num_actions) == (9, 4)
    assert mdp.terminal.tolist() == [False] * 8 + [True]
    assert mdp.initial_dist[0] == 1.0
    # moving down from the cell above the goal
    assert mdp.transition[5, 2, 8] == 1.0
    assert mdp.reward[5, 2] == pytest.approx(STEP_REWARD + GOAL_REWARD)
    # bumping into the top wall stays put
    assert mdp.transition[0, 0, 0] == 1.0
    assert mdp.reward[0, 0] == STEP_REWARD


def test_slippery_chain_rows():
    mdp, _ = build_env(EnvSpec("chain", 4, 0.2, 10, 0.9))
    assert (mdp.num_states, mdp.num_actions) == (4, 2)
    np.testing.assert_allclose(mdp.transition[1, 1], [0.1, 0.0, 0.9, 0.0])
    np.testing.assert_allclose(mdp.transition.sum(axis=2), 1.0)


def test_env_spec_parse():
    spec = EnvSpec.parse("chain:6:0.2:30")
    assert spec == EnvSpec("chain", 6, 0.2, 30)
    assert EnvSpec.parse(spec.env_id) == spec
    assert EnvSpec.parse("gridworld").size == EnvSpec().size


@pytest.mark.parametrize("env_id", ["maze", "gridworld:x", "chain:1", "chain:4:1.5", "chain:4:0:10:9"])
def test_env_spec_rejects_bad_ids(env_id):
    with pytest.raises(ConfigError):
        EnvSpec.parse(env_id)


def test_stepper_requires_reset():
    mdp, stepper = build_env(EnvSpec("chain", 4, 0.0, 10, 0.9))
    with pytest.raises(RuntimeError):
        stepper.step(0)


def test_stepper_truncates_at_horizon():
    _, stepper = build_env(EnvSpec("chain", 10, 0.0, 3, 0.9), seed=0)
    stepper.reset()
    flags = [stepper.step(0)[2:] for _ in range(3)]
    assert flags == [(False, False), (False, False), (False, True)]


def test_stepper_terminates_at_goal():
    _, stepper = build_env(EnvSpec("chain", 3, 0.0, 10, 0.9), seed=0)
    stepper.reset()
    assert stepper.step(1) == (1, STEP_REWARD, False, False)
    next_state, reward, terminated, truncated = stepper.step(1)
    assert (next_state, terminated, truncated) == (2, True, False)
    assert reward == pytest.approx(STEP_REWARD + GOAL_REWARD)


def test_behavior_tiers(small_grid):
    _, mdp, _ = small_grid
    assert np.allclose(make_behavior_policy(mdp, "random").table, 0.25)
    expert = make_behavior_policy(mdp, BehaviorTier.EXPERT)
    assert isinstance(expert, Policy) and expert.is_deterministic
    medium = make_behavior_policy(mdp, "medium")
    assert medium.table.max() == pytest.approx(0.6 + 0.1)
    assert isinstance(make_behavior_policy(mdp, "medium_replay"), EpisodeMixture)
    with pytest.raises(ValueError):
        make_behavior_policy(mdp, "superhuman")


@pytest.mark.parametrize("tier", ["random", "expert", "medium"])
def test_behavior_seed_does_not_change_the_policy(small_grid, tier):
    _, mdp, _ = small_grid
    unseeded = make_behavior_policy(mdp, tier)
    for seed in (0, 7):
        np.testing.assert_array_equal(make_behavior_policy(mdp, tier, seed=seed).table, unseeded.table)


def test_dataset_has_exact_size_and_origin(small_grid):
    _, mdp, stepper = small_grid
    dataset = generate_offline_dataset(stepper, Policy.uniform(9, 4), 321, seed=4)
    assert len(dataset) == 321
    assert all(t.origin is Origin.OFFLINE for t in dataset)
    assert dataset.transitions[0].state == 0


def test_dataset_is_reproducible(small_grid):
    spec, mdp, _ = small_grid
    behavior = make_behavior_policy(mdp, "medium_replay")
    first = generate_offline_dataset(build_env(spec)[1], behavior, 200, seed=9)
    second = generate_offline_dataset(build_env(spec, seed=123)[1], behavior, 200, seed=9)
    assert first.transitions == second.transitions


def test_expert_data_beats_random_data():
    spec = EnvSpec("gridworld", 3, 0.0, 20, 0.9)
    mdp, stepper = build_env(spec)
    expert = generate_offline_dataset(stepper, make_behavior_policy(mdp, "expert"), 400, seed=0)
    rand = generate_offline_dataset(stepper, make_behavior_policy(mdp, "random"), 400, seed=0)
    expert_returns = episode_returns(expert, 0.9)
    assert expert_returns.mean() > episode_returns(rand, 0.9).mean()
    assert expert_returns[0] == pytest.approx(STEP_REWARD * (1 + 0.9 + 0.81) + 0.99 * 0.9 ** 3)


def test_generate_rejects_nonpositive_size(small_grid):
    _, _, stepper = small_grid
    with pytest.raises(ValueError):
        generate_offline_dataset(stepper, Policy.uniform(9, 4), 0, seed=0)


def test_episode_returns_splits_on_done_and_restart():
    stream = [
        Transition(0, 0, 1.0, 1, False, Origin.OFFLINE, 0),
        Transition(1, 0, 1.0, 2, True, Origin.OFFLINE, 1),
        Transition(0, 0, 2.0, 0, False, Origin.OFFLINE, 0),
        Transition(0, 0, 2.0, 0, False, Origin.OFFLINE, 0),
    ]
    np.testing.assert_allclose(episode_returns(stream, 0.5), [1.5, 2.0, 2.0])


def test_empty_dataset_is_rejected():
    with pytest.raises(EmptyDatasetError):
        Dataset((), "chain:4:0.0:10", "random", 0)


def test_dataset_file_round_trip(tmp_path, small_grid):
    spec, mdp, stepper = small_grid
    dataset = generate_offline_dataset(
        stepper, make_behavior_policy(mdp, "medium"), 150, seed=2, tier="medium", env_id=spec.env_id
    )
    path = tmp_path / "d_off.txt"
    save_dataset(dataset, path)
    loaded = load_dataset(path)
    assert loaded.transitions == dataset.transitions
    assert (loaded.env_id, loaded.behavior_tag, loaded.seed) == (spec.env_id, "medium", 2)


def test_load_dataset_rejects_wrong_count(tmp_path):
    path = tmp_path / "broken.txt"
    path.write_text("dataset - random 0 2\n0 1 -0.01 1 0 offline 0\n")
    with pytest.raises(ValueError, match="announces"):
        load_dataset(path)


def test_stepper_reset_to_state(small_grid):
    _, mdp, _ = small_grid
    stepper = Stepper(mdp, 5, seed=1)
    assert stepper.reset(state=4) == 4
    assert stepper.elapsed == 0
