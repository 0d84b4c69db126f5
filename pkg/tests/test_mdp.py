# test_mdp.py

import json

import numpy as np
import pytest

from mdp import (AbsoluteContinuityException, DiscountFunction, FiniteMdp, ImportanceRatioException,
                 InvalidMdpException, TabularPolicy, check_absolute_continuity, importance_ratio, load_mdp_json,
                 load_policy_json, random_mdp, sample_episode, save_mdp_json)


def one_step_chain() -> FiniteMdp:
    """ s0 --(r=1)--> terminal s1 """
    return FiniteMdp(2, 1, {(0, 0): [(1, 1.0, 1.0)]}, np.array([1.0, 0.0]), np.array([False, True]))


def two_action_chain() -> FiniteMdp:
    return FiniteMdp(2, 2, {(0, 0): [(1, 0.0, 1.0)], (0, 1): [(1, 2.0, 1.0)]},
                     np.array([1.0, 0.0]), np.array([False, True]))


def test_dense_dynamics():
    mdp = one_step_chain()
    assert mdp.three_arg(0, 0).tolist() == [0.0, 1.0]
    assert mdp.reward_sa(0, 0) == 1.0
    policy = TabularPolicy(np.array([[1.0], [1.0]]))
    np.testing.assert_array_equal(mdp.transition_matrix(policy), [[0.0, 1.0], [0.0, 0.0]])
    np.testing.assert_array_equal(mdp.expected_rewards(policy), [1.0, 0.0])


def test_probabilities_must_sum_to_one():
    with pytest.raises(InvalidMdpException):
        FiniteMdp(2, 1, {(0, 0): [(1, 1.0, 0.7)]}, np.array([1.0, 0.0]), np.array([False, True]))


def test_missing_transition_is_rejected():
    with pytest.raises(InvalidMdpException):
        FiniteMdp(2, 2, {(0, 0): [(1, 1.0, 1.0)]}, np.array([1.0, 0.0]), np.array([False, True]))


def test_initial_distribution_on_terminal_is_rejected():
    with pytest.raises(InvalidMdpException):
        FiniteMdp(2, 1, {(0, 0): [(1, 1.0, 1.0)]}, np.array([0.5, 0.5]), np.array([False, True]))


def test_policy_must_be_non_negative():
    with pytest.raises(InvalidMdpException):
        TabularPolicy(np.array([[1.5, -0.5]]))


def test_policy_shape_is_checked():
    with pytest.raises(InvalidMdpException):
        TabularPolicy(np.array([[0.5, 0.5], [0.5, 0.5]])).validate_for(one_step_chain())


def test_constant_discount_zeroes_terminal_states():
    gamma = DiscountFunction.constant(one_step_chain(), 0.9)
    assert gamma(0) == 0.9
    assert gamma(1) == 0.0


def test_discount_on_terminal_is_rejected():
    with pytest.raises(InvalidMdpException):
        DiscountFunction(np.array([0.9, 0.9])).validate_for(one_step_chain())
    with pytest.raises(InvalidMdpException):
        DiscountFunction(np.array([1.2, 0.0]))


def test_importance_ratio():
    behavior = TabularPolicy(np.array([[0.5, 0.5], [0.5, 0.5]]))
    target = TabularPolicy(np.array([[0.25, 0.75], [0.5, 0.5]]))
    assert importance_ratio(target, behavior, 0, 1) == pytest.approx(1.5)
    with pytest.raises(ImportanceRatioException):
        importance_ratio(target, TabularPolicy(np.array([[1.0, 0.0], [1.0, 0.0]])), 0, 1)


def test_absolute_continuity():
    mdp = two_action_chain()
    behavior = TabularPolicy(np.array([[1.0, 0.0], [0.5, 0.5]]))
    target = TabularPolicy(np.array([[0.5, 0.5], [0.5, 0.5]]))
    with pytest.raises(AbsoluteContinuityException) as info:
        check_absolute_continuity(mdp, behavior, target)
    assert (info.value.s, info.value.a) == (0, 1)
    check_absolute_continuity(mdp, target, behavior)


def test_sample_episode_ends_on_terminal():
    mdp = one_step_chain()
    policy = TabularPolicy(np.array([[1.0], [1.0]]))
    gamma = DiscountFunction.constant(mdp, 0.9)
    episode = sample_episode(mdp, policy, policy, gamma, 0)
    assert len(episode) == 1
    step = episode[0]
    assert (step.s, step.a, step.r, step.s_next) == (0, 0, 1.0, 1)
    assert step.terminal and step.gamma_next == 0.0 and step.rho == 1.0


def test_sample_episode_off_policy_ratios():
    mdp = two_action_chain()
    behavior = TabularPolicy(np.array([[0.5, 0.5], [0.5, 0.5]]))
    target = TabularPolicy(np.array([[0.0, 1.0], [0.5, 0.5]]))
    gamma = DiscountFunction.constant(mdp, 1.0)
    rng = np.random.default_rng(3)
    for _ in range(20):
        step = sample_episode(mdp, behavior, target, gamma, rng)[0]
        assert step.rho == (2.0 if step.a == 1 else 0.0)


def test_json_files(tmp_path):
    mdp = two_action_chain()
    path = str(tmp_path / 'mdp.json')
    save_mdp_json(mdp, path)
    loaded = load_mdp_json(path)
    np.testing.assert_array_equal(loaded.p_next, mdp.p_next)
    np.testing.assert_array_equal(loaded.r_expected, mdp.r_expected)

    policy_path = tmp_path / 'policy.json'
    policy_path.write_text(json.dumps({'probs': [[0.5, 0.5], [0.5, 0.5]]}))
    assert load_policy_json(str(policy_path), loaded).probs.shape == (2, 2)


def test_malformed_json(tmp_path):
    path = tmp_path / 'broken.json'
    path.write_text('{"states": 2,')
    with pytest.raises(InvalidMdpException):
        load_mdp_json(str(path))
    path.write_text(json.dumps({'states': 2}))
    with pytest.raises(InvalidMdpException):
        load_mdp_json(str(path))


def test_random_mdp_is_episodic():
    mdp, policy = random_mdp(8, 3, np.random.default_rng(0))
    assert mdp.terminal.tolist() == [False] * 7 + [True]
    policy.validate_for(mdp)
    assert np.all(mdp.p_next[:-1, :, -1] > 0)
