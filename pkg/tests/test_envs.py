import numpy as np
import pytest

from svrpg_lab.envs import (CartPole, Trajectory, TrajectoryBatch, discounted_return,
                            discounted_returns, make_env, sample_batch, sample_trajectory)
from svrpg_lab.errors import ConfigError, RolloutError
from svrpg_lab.policy import GaussianPolicy
from svrpg_lab.rng import Streams


def test_cartpole_defaults(cartpole):
    assert cartpole.horizon == 100
    assert cartpole.discount == 0.99
    assert cartpole.state_dim == 4 and cartpole.action_dim == 1


def test_bandit_has_one_step(bandit, bandit_policy):
    assert bandit.horizon == 1
    traj = sample_trajectory(bandit, bandit_policy, np.zeros(1), np.random.default_rng(0))
    assert traj.length == 1
    batch = sample_batch(bandit, bandit_policy, np.zeros(1), 100, Streams(0))
    assert len(batch) == 100 and (batch.lengths == 1).all()


def test_upright_cartpole_reward_is_ten(cartpole):
    _, r, term = cartpole.step(np.zeros(4), np.zeros(1))
    assert r[0] == 10.0 and not term[0]


@pytest.mark.parametrize("overrides", [{"mass": 1.0}, {"horizon": float("nan")}, {"horizon": 2.5}])
def test_bad_overrides(overrides):
    with pytest.raises(ConfigError):
        make_env("cartpole", overrides)


def test_unknown_env():
    with pytest.raises(ConfigError):
        make_env("acrobot")


def test_overrides_apply():
    env = make_env("cartpole", {"horizon": 20, "gamma": 0.9})
    assert env.horizon == 20 and env.discount == 0.9


def test_discounted_return_examples():
    t = Trajectory(np.zeros((4, 1)), np.zeros((3, 1)), np.ones(3))
    assert discounted_return(t, 0.5) == 1.75
    t1 = Trajectory(np.zeros((2, 1)), np.zeros((1, 1)), np.array([-3.0]))
    assert discounted_return(t1, 0.3) == -3.0
    t = Trajectory(np.zeros((101, 1)), np.zeros((100, 1)), np.full(100, 10.0))
    assert discounted_return(t, 0.99) == pytest.approx(10 * (1 - 0.99 ** 100) / 0.01, rel=1e-12)


def test_trajectory_length_check():
    with pytest.raises(ValueError):
        Trajectory(np.zeros((3, 1)), np.zeros((3, 1)), np.zeros(3))


def test_rollouts_deterministic(cartpole, cartpole_mlp):
    theta = cartpole_mlp.init_params(np.random.default_rng(3))
    a = sample_batch(cartpole, cartpole_mlp, theta, 7, Streams(5))
    b = sample_batch(cartpole, cartpole_mlp, theta, 7, Streams(5))
    for x, y in zip((a.states, a.actions, a.rewards, a.lengths), (b.states, b.actions, b.rewards, b.lengths)):
        assert np.array_equal(x, y)


def test_workers_do_not_change_batch(cartpole, cartpole_mlp):
    theta = cartpole_mlp.init_params(np.random.default_rng(1))
    ref = sample_batch(cartpole, cartpole_mlp, theta, 13, Streams(2, (1, 4)))
    for w in (2, 3, 4):
        got = sample_batch(cartpole, cartpole_mlp, theta, 13, Streams(2, (1, 4)), workers=w)
        assert np.array_equal(ref.states, got.states)
        assert np.array_equal(ref.actions, got.actions)
        assert np.array_equal(ref.lengths, got.lengths)


def test_trajectory_independent_of_batch_size(cartpole, cartpole_mlp):
    theta = cartpole_mlp.init_params(np.random.default_rng(1))
    small = sample_batch(cartpole, cartpole_mlp, theta, 3, Streams(9))
    big = sample_batch(cartpole, cartpole_mlp, theta, 30, Streams(9))
    for i in range(3):
        assert np.array_equal(small[i].states, big[i].states)


def test_single_sample_matches_indexed_stream(cartpole, cartpole_mlp):
    theta = cartpole_mlp.init_params(np.random.default_rng(4))
    s = Streams(3, (1, 0))
    one = sample_batch(cartpole, cartpole_mlp, theta, 1, s)[0]
    direct = sample_trajectory(cartpole, cartpole_mlp, theta, s.indexed(0))
    assert np.array_equal(one.states, direct.states) and np.array_equal(one.rewards, direct.rewards)


def test_cartpole_constraints_and_reward_bound(cartpole):
    policy = GaussianPolicy.linear(4, 1, std="fixed", sigma=5.0)
    theta = np.zeros(policy.dim)
    batch = sample_batch(cartpole, policy, theta, 200, Streams(0))
    a_max = 10.0
    assert (batch.lengths <= 100).all() and (batch.lengths < 100).any()
    for i in range(len(batch)):
        t = batch[i]
        # every state an action was taken in lies inside the limits
        assert (np.abs(t.states[:-1, 0]) <= 2.4).all() and (np.abs(t.states[:-1, 1]) <= 0.2).all()
        assert (t.rewards <= 10.0).all() and (t.rewards >= 10 - 2 - 1e-5 * a_max ** 2).all()
        assert (np.abs(t.actions) <= a_max).all()
        # an early end happens exactly when the last state violates a limit
        if t.length < 100:
            assert cartpole.is_terminal(t.states[-1])
        assert not any(cartpole.is_terminal(s) for s in t.states[:-1])
    assert (np.abs(batch.rewards) <= cartpole.reward_bound).all()


def test_pointmass_reward_bound():
    env = make_env("pointmass")
    policy = GaussianPolicy.linear(1, 1, std="fixed", sigma=3.0)
    batch = sample_batch(env, policy, np.array([0.0, 1.0]), 200, Streams(1))
    assert (np.abs(batch.rewards[batch.mask]) <= env.reward_bound).all()


def test_padding_and_mask(cartpole):
    policy = GaussianPolicy.linear(4, 1, std="fixed", sigma=5.0)
    batch = sample_batch(cartpole, policy, np.zeros(policy.dim), 50, Streams(0))
    assert not batch.rewards[~batch.mask].any()
    assert (batch.mask.sum(axis=1) == batch.lengths).all()
    rebuilt = TrajectoryBatch.from_trajectories([batch[i] for i in range(len(batch))], horizon=100)
    assert np.array_equal(rebuilt.states, batch.states)
    assert np.allclose(discounted_returns(batch, 0.99),
                       [discounted_return(batch[i], 0.99) for i in range(len(batch))], rtol=1e-12)


def test_nonfinite_rollout_reports_index():
    class Broken(CartPole):
        def _step(self, states, actions):
            nxt, r, term = super()._step(states, actions)
            r = r.copy()
            r[:] = np.nan
            return nxt, r, term

    policy = GaussianPolicy.linear(4, 1, std="fixed")
    with pytest.raises(RolloutError) as info:
        sample_batch(Broken(), policy, np.zeros(policy.dim), 4, Streams(0))
    assert info.value.step == 0
