# test_environments.py

import numpy as np
import pytest
from scipy import stats

from dp_oracle import solve_values_direct
from environments import (FROZENLAKE_DOWN, FROZENLAKE_LEFT, FROZENLAKE_RIGHT, MOUNTAINCAR_MAX_SPEED, FrozenLakeEnv,
                          NoisyMountainCarEnv, RingWorldEnv, TerminatedEnvironmentException, make_environment)
from mdp import TabularPolicy


def test_ringworld_walk_to_the_left_exit():
    env = RingWorldEnv()
    rng = np.random.default_rng(0)
    with pytest.raises(TerminatedEnvironmentException):
        env.step(0, rng)
    assert env.reset(rng) == 6
    for expected in range(5, 0, -1):
        assert env.step(0, rng) == (expected, 0.0, False, 0.95)
    assert env.step(0, rng) == (0, -1.0, True, 0.0)
    with pytest.raises(TerminatedEnvironmentException):
        env.step(0, rng)


def test_ringworld_right_exit_pays_one():
    env = RingWorldEnv(3, gamma=0.5)
    rng = np.random.default_rng(0)
    env.reset(rng)
    env.step(1, rng)
    assert env.step(1, rng) == (4, 1.0, True, 0.0)
    with pytest.raises(ValueError):
        RingWorldEnv(4)


def test_ringworld_symmetric_policy_values():
    env = RingWorldEnv()
    mdp = env.as_finite_mdp()
    values = solve_values_direct(mdp, TabularPolicy.from_action_probs(env.n_total, [0.5, 0.5]), env.discount())
    assert values[env.start] == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(values, -values[::-1], atol=1e-12)
    assert values[1] < 0 < values[env.n_total - 2]


def test_ringworld_policy_pairs():
    env = RingWorldEnv()
    behavior, target = env.policies('0.3/0.25')
    assert behavior.probs[3].tolist() == pytest.approx([0.3, 0.7])
    assert target.probs[3].tolist() == [0.25, 0.75]
    with pytest.raises(ValueError):
        env.policies('0.5/0.1')
    features = env.features()
    assert features.dimension == env.n_total
    assert not np.any(features.encode(0)) and features.encode(3)[3] == 1.0


def test_invalid_action():
    env = RingWorldEnv()
    rng = np.random.default_rng(0)
    env.reset(rng)
    with pytest.raises(ValueError):
        env.step(2, rng)


def test_frozenlake_slippery_dynamics():
    env = FrozenLakeEnv()
    mdp = env.as_finite_mdp()
    # LEFT from the corner: up and left hit the wall, down slips to the cell below
    np.testing.assert_allclose(mdp.three_arg(0, FROZENLAKE_LEFT)[[0, 4]], [2 / 3, 1 / 3])
    # RIGHT next to the goal reaches it a third of the time
    assert mdp.three_arg(14, FROZENLAKE_RIGHT)[15] == pytest.approx(1 / 3)
    assert mdp.reward_sa(14, FROZENLAKE_RIGHT) == pytest.approx(1 / 3)
    assert mdp.terminal.sum() == 5


def test_frozenlake_deterministic_walk():
    env = FrozenLakeEnv(slippery=False)
    rng = np.random.default_rng(0)
    env.reset(rng)
    for action, expected in [(FROZENLAKE_DOWN, 4), (FROZENLAKE_DOWN, 8), (FROZENLAKE_RIGHT, 9), (FROZENLAKE_RIGHT, 10),
                             (FROZENLAKE_DOWN, 14)]:
        assert env.step(action, rng)[0] == expected
    assert env.step(FROZENLAKE_RIGHT, rng) == (15, 1.0, True, 0.0)


def test_frozenlake_policies_and_features():
    env = FrozenLakeEnv()
    behavior, target = env.policies('off-policy')
    assert behavior.probs[0].tolist() == [0.25] * 4
    assert target.probs[0].tolist() == [0.2, 0.3, 0.3, 0.2]
    on_policy = env.policies('on-policy')
    assert on_policy[0] is on_policy[1]
    values = solve_values_direct(env.as_finite_mdp(), target, env.discount())
    assert 0.0 < values[0] < values[14] < 1.0

    features = env.features(4, 4)
    assert features.dimension == 64
    for s in range(env.n_total):
        assert features.encode(s).sum() == (0 if env.terminal[s] else 4)


def test_mountaincar_reaches_the_goal():
    env = NoisyMountainCarEnv(noise_prob=0.0)
    rng = np.random.default_rng(1)
    position, velocity = env.reset(rng)
    assert -1.2 <= position < 0.5 and velocity == 0.0
    for _ in range(1000):
        (position, velocity), reward, terminal, gamma_next = env.step(2 if velocity >= 0 else 0, rng)
        assert reward == -1.0 and abs(velocity) <= MOUNTAINCAR_MAX_SPEED
        if terminal:
            break
    assert terminal and gamma_next == 0.0 and position >= 0.5
    assert env.feature_map().encode((position, velocity)).sum() == 8


def test_mountaincar_noise_validation():
    with pytest.raises(ValueError):
        NoisyMountainCarEnv(noise_prob=1.5)


def test_make_environment():
    assert make_environment('ringworld').gamma == 0.95
    assert make_environment('frozenlake', 0.9).gamma == 0.9
    assert make_environment('mountaincar').gamma == 1.0
    assert make_environment('ringworld', n_states=5).n_total == 7
    with pytest.raises(ValueError):
        make_environment('cartpole')


def test_frozenlake_sampling_matches_the_enumerated_dynamics():
    env = FrozenLakeEnv()
    mdp = env.as_finite_mdp()
    rng = np.random.default_rng(3)
    s, action, n = 9, FROZENLAKE_DOWN, 30000
    counts = np.zeros(env.n_total)
    for _ in range(n):
        env.position, env.terminated = s, False
        counts[env.step(action, rng)[0]] += 1
    expected = mdp.three_arg(s, action) * n
    support = expected > 0
    assert np.all(counts[~support] == 0)
    assert stats.chisquare(counts[support], expected[support]).pvalue > 0.001
