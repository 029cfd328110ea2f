import math

import numpy as np
import pytest

from svrpg_lab.envs import make_env
from svrpg_lab.oracle import (bandit_analytic, bandit_oracle, finite_difference_grad, mc_gradient,
                              mc_performance)
from svrpg_lab.policy import GaussianPolicy
from svrpg_lab.rng import Streams

from conftest import se_close


def test_analytic_examples():
    assert bandit_analytic(1.0, 1.0, 0.5) == (-0.25, 0.0)
    assert bandit_analytic(0.0, 1.0, 0.5) == (-1.25, 2.0)
    for d in (0.1, 0.7):
        assert bandit_analytic(1 + d, 1, 0.3)[1] == pytest.approx(-bandit_analytic(1 - d, 1, 0.3)[1], abs=1e-15)
    with pytest.raises(ValueError):
        bandit_analytic(4.0, 1.0, 0.5, clip=(-5, 5))
    with pytest.raises(ValueError):
        bandit_analytic(0.0, 1.0, 0.0)


def test_mc_performance(bandit, bandit_policy):
    res = mc_performance(bandit, bandit_policy, np.array([1.0]), 100_000, Streams(0))
    assert abs(res.value - (-0.25)) <= 3 * res.std_error
    # tiny sigma and a deterministic env leave no spread to speak of
    sharp = GaussianPolicy.linear(1, 1, features="bias", std="fixed", sigma=1e-12)
    assert mc_performance(bandit, sharp, np.array([1.0]), 10, Streams(0)).std_error < 1e-20
    with pytest.raises(ValueError):
        mc_performance(bandit, bandit_policy, np.zeros(1), 1, Streams(0))


def test_standard_error_scaling(bandit, bandit_policy):
    ratios = [mc_performance(bandit, bandit_policy, np.zeros(1), 4000, Streams(s)).std_error
              / mc_performance(bandit, bandit_policy, np.zeros(1), 2000, Streams(s, (9,))).std_error
              for s in range(10)]
    assert abs(np.mean(ratios) - 1 / math.sqrt(2)) < 0.2 / math.sqrt(2)


def test_oracle_triangle(bandit, bandit_policy):
    theta = np.zeros(1)
    _, grad = bandit_oracle(bandit, 0.0, 0.5)
    assert grad == 2.0
    mc = {est: mc_gradient(bandit, bandit_policy, theta, 100_000, est, Streams(1)) for est in ("reinforce", "gpomdp")}
    fd = finite_difference_grad(bandit, bandit_policy, theta, 1e-3, 100_000, Streams(2))
    for res in list(mc.values()) + [fd]:
        assert se_close(res.value, res.std_error, grad)
    joint = math.hypot(mc["gpomdp"].std_error[0], fd.std_error[0])
    assert abs(mc["gpomdp"].value[0] - fd.value[0]) <= 4 * joint
    # paired comparison on the same trajectories
    assert abs(mc["reinforce"].value[0] - mc["gpomdp"].value[0]) <= 4 * math.hypot(
        mc["reinforce"].std_error[0], mc["gpomdp"].std_error[0])


def test_mc_gradient_zero_reward():
    env = make_env("bandit", {"c": 0.0, "action_low": -1e-300, "action_high": 1e-300})
    policy = GaussianPolicy.linear(1, 1, features="bias", std="fixed")
    res = mc_gradient(env, policy, np.zeros(1), 50, "gpomdp", Streams(0))
    assert np.all(res.value == 0.0)


def test_fd_at_optimum_and_eps_halving(bandit, bandit_policy):
    at_opt = finite_difference_grad(bandit, bandit_policy, np.array([1.0]), 1e-3, 20_000, Streams(3))
    assert abs(at_opt.value[0]) <= 4 * at_opt.std_error[0] + 1e-12
    a = finite_difference_grad(bandit, bandit_policy, np.array([0.3]), 1e-2, 20_000, Streams(3))
    b = finite_difference_grad(bandit, bandit_policy, np.array([0.3]), 5e-3, 20_000, Streams(3))
    assert abs(a.value[0] - b.value[0]) < max(a.std_error[0], 1e-12)


def test_pointmass_fd_agrees_with_estimator():
    env = make_env("pointmass", {"horizon": 10})
    policy = GaussianPolicy.linear(1, 1, std="fixed", sigma=0.5)
    theta = np.array([-0.3, 0.1])
    fd = finite_difference_grad(env, policy, theta, 1e-4, 20_000, Streams(4))
    mc = mc_gradient(env, policy, theta, 20_000, "gpomdp", Streams(5))
    assert np.all(np.abs(fd.value - mc.value) <= 4 * np.hypot(fd.std_error, mc.std_error))
