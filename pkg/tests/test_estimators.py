import math

import numpy as np
import pytest

from svrpg_lab.envs import Trajectory, TrajectoryBatch, make_env, sample_batch
from svrpg_lab.estimators import (Baseline, baseline_features, estimator_variance, fit_linear_baseline,
                                  g_norm_bound, gpomdp_grad, iw_variance_diag, offpolicy_gpomdp_grad,
                                  offpolicy_reinforce_grad, per_trajectory_grads, reinforce_grad,
                                  reinforce_variance_bound, returns_to_go, smoothness_bound)
from svrpg_lab.policy import GaussianPolicy
from svrpg_lab.rng import Streams

from conftest import se_close

THETA0 = np.zeros(1)


def _bandit_batch(bandit, policy, theta, n, seed=0):
    return sample_batch(bandit, policy, np.atleast_1d(theta).astype(float), n, Streams(seed))


@pytest.mark.parametrize("fn", [reinforce_grad, gpomdp_grad])
def test_on_policy_bandit_unbiased(bandit, bandit_policy, fn):
    batch = _bandit_batch(bandit, bandit_policy, 0.0, 100_000)
    est = fn(batch, bandit_policy, THETA0, bandit.discount)
    se = math.sqrt(est.trace_cov / est.n)
    assert se_close(est.vector[0], se, 2.0)
    shifted = fn(batch, bandit_policy, THETA0, bandit.discount, Baseline.constant(-1.25, 1))
    se_b = math.sqrt(shifted.trace_cov / shifted.n)
    assert se_close(shifted.vector[0], se_b, 2.0)
    # paired difference of the two estimates on shared trajectories
    diff = est.per_trajectory[:, 0] - shifted.per_trajectory[:, 0]
    assert abs(diff.mean()) <= 4 * diff.std(ddof=1) / math.sqrt(len(diff))


def test_baseline_shrinks_bandit_variance(bandit, bandit_policy):
    batch = _bandit_batch(bandit, bandit_policy, 0.0, 20_000)
    plain = reinforce_grad(batch, bandit_policy, THETA0, bandit.discount)
    based = reinforce_grad(batch, bandit_policy, THETA0, bandit.discount, Baseline.constant(-1.25, 1))
    assert based.trace_cov < plain.trace_cov


def test_zero_rewards_give_zero_gradient():
    policy = GaussianPolicy.linear(1, 1, std="learned")
    n, H = 5, 4
    rng = np.random.default_rng(0)
    batch = TrajectoryBatch(rng.normal(size=(n, H + 1, 1)), rng.normal(size=(n, H, 1)), np.zeros((n, H)),
                            np.full(n, H))
    theta = np.array([0.1, 0.2, 0.0])
    for fn in (reinforce_grad, gpomdp_grad):
        assert np.all(fn(batch, policy, theta, 0.9).vector == 0.0)


def test_one_step_estimators_coincide(bandit, bandit_policy):
    batch = _bandit_batch(bandit, bandit_policy, 0.3, 50)
    a = reinforce_grad(batch, bandit_policy, np.array([0.3]), bandit.discount)
    b = gpomdp_grad(batch, bandit_policy, np.array([0.3]), bandit.discount)
    assert np.array_equal(a.vector, b.vector)
    behavior, target = np.array([0.3]), np.array([0.1])
    c = offpolicy_reinforce_grad(batch, bandit_policy, behavior, target, bandit.discount)
    d = offpolicy_gpomdp_grad(batch, bandit_policy, behavior, target, bandit.discount)
    assert np.array_equal(c.vector, d.vector)


def test_two_step_hand_expansion():
    policy = GaussianPolicy.linear(1, 1, features="affine", std="fixed", sigma=0.8)
    theta = np.array([0.4, -0.3])
    s = np.array([[0.5], [-0.2], [0.1]])
    a = np.array([[0.1], [0.7]])
    r = np.array([1.5, -2.0])
    traj = Trajectory(s, a, r)
    g, b = 0.9, Baseline("linear", np.array([0.2, -0.1, 0.3, 0.0, 0.5, 0.05]))
    sc = [policy.score(theta, s[k], a[k]) for k in range(2)]
    bv = [b.weights @ np.array([s[k, 0], s[k, 0] ** 2, 0.01 * k, (0.01 * k) ** 2, (0.01 * k) ** 3, 1.0])
          for k in range(2)]
    c0, c1 = r[0] - bv[0], g * r[1] - bv[1]
    gp = sc[0] * c0 + (sc[0] + sc[1]) * c1
    rf = (sc[0] + sc[1]) * (c0 + c1)
    got_gp = per_trajectory_grads([traj], policy, theta, g, "gpomdp", b)[0]
    got_rf = per_trajectory_grads([traj], policy, theta, g, "reinforce", b)[0]
    assert np.allclose(got_gp, gp, atol=1e-12, rtol=0)
    assert np.allclose(got_rf, rf, atol=1e-12, rtol=0)


@pytest.mark.parametrize("gap", [0.2, 0.5])
@pytest.mark.parametrize("fn", [offpolicy_reinforce_grad, offpolicy_gpomdp_grad])
def test_off_policy_bandit_unbiased(bandit, bandit_policy, fn, gap):
    behavior, target = np.array([gap]), np.array([0.0])
    batch = _bandit_batch(bandit, bandit_policy, behavior, 100_000, seed=4)
    est = fn(batch, bandit_policy, behavior, target, bandit.discount)
    assert se_close(est.vector[0], math.sqrt(est.trace_cov / est.n), 2.0)


def test_off_policy_identity_and_single(cartpole, cartpole_mlp):
    theta = cartpole_mlp.init_params(np.random.default_rng(0))
    batch = sample_batch(cartpole, cartpole_mlp, theta, 5, Streams(0))
    assert np.array_equal(offpolicy_reinforce_grad(batch, cartpole_mlp, theta, theta, 0.99).vector,
                          reinforce_grad(batch, cartpole_mlp, theta, 0.99).vector)
    assert np.array_equal(offpolicy_gpomdp_grad(batch, cartpole_mlp, theta, theta, 0.99).vector,
                          gpomdp_grad(batch, cartpole_mlp, theta, 0.99).vector)
    other = theta + 0.05
    one = batch.take([0])
    from svrpg_lab.policy import importance_weight
    w = importance_weight(cartpole_mlp, other, theta, one[0])
    g = per_trajectory_grads(one, cartpole_mlp, other, 0.99, "reinforce")[0]
    assert np.allclose(offpolicy_reinforce_grad(one, cartpole_mlp, theta, other, 0.99).vector, w * g,
                       rtol=1e-12, atol=0)


def test_estimators_agree_in_expectation_on_cartpole(cartpole, cartpole_mlp):
    theta = cartpole_mlp.init_params(np.random.default_rng(7))
    batch = sample_batch(cartpole, cartpole_mlp, theta, 2000, Streams(7))
    diff = (per_trajectory_grads(batch, cartpole_mlp, theta, 0.99, "reinforce")
            - per_trajectory_grads(batch, cartpole_mlp, theta, 0.99, "gpomdp"))
    se = diff.std(axis=0, ddof=1) / math.sqrt(len(diff))
    assert se_close(diff.mean(axis=0), se, 0.0)


def test_empty_set_rejected(bandit_policy):
    with pytest.raises(ValueError):
        reinforce_grad([], bandit_policy, THETA0, 0.9)


def test_baseline_features_and_fit():
    assert baseline_features(np.zeros((2, 3, 4))).shape == (2, 3, 12)
    n, H = 6, 5
    rng = np.random.default_rng(0)
    batch = TrajectoryBatch(rng.normal(size=(n, H + 1, 2)), np.zeros((n, H, 1)), np.ones((n, H)), np.full(n, H))
    b = fit_linear_baseline(batch, 0.0, ridge=1e-10)
    assert np.allclose(b.values(batch), 1.0, atol=1e-6)
    assert len(b.weights) == 2 * 2 + 4


def test_baseline_fit_duplication_invariant(cartpole, cartpole_mlp):
    theta = cartpole_mlp.init_params(np.random.default_rng(0))
    batch = sample_batch(cartpole, cartpole_mlp, theta, 20, Streams(0))
    doubled = TrajectoryBatch.concatenate([batch, batch])
    a = fit_linear_baseline(batch, 0.99).weights
    b = fit_linear_baseline(doubled, 0.99).weights
    assert np.allclose(a, b, rtol=1e-9, atol=1e-9)


def test_returns_to_go():
    batch = TrajectoryBatch(np.zeros((1, 4, 1)), np.zeros((1, 3, 1)), np.array([[1.0, 2.0, 0.0]]), np.array([2]))
    assert np.allclose(returns_to_go(batch, 0.5), [[2.0, 2.0, 0.0]])


def test_estimator_variance_examples():
    assert estimator_variance(np.array([[0.0], [2.0]])) == 2.0
    assert estimator_variance(np.ones((5, 3))) == 0.0
    g = np.random.default_rng(1).normal(size=(10, 4))
    c = g - g.mean(axis=0)
    assert estimator_variance(g) == pytest.approx(np.trace(c.T @ c) / 9, abs=1e-12)
    with pytest.raises(ValueError):
        estimator_variance(np.ones((1, 2)))


@pytest.mark.parametrize("G,F,R,H,gamma", [(1.0, 1.0, 1.0, 2, 0.0), (2.0, 0.5, 3.0, 5, 0.9), (0.3, 4.0, 10.0, 100, 0.99)])
def test_smoothness_bound_hand_values(G, F, R, H, gamma):
    horizon = sum(gamma ** k for k in range(H))
    assert smoothness_bound(G, F, R, H, gamma) == pytest.approx(horizon * R * H * (H * G * G + F), rel=1e-12)


def test_bound_examples():
    assert smoothness_bound(1, 1, 1, 2, 0.0) == 6.0
    assert smoothness_bound(1.5, 2.0, 3.0, 1, 0.0) == pytest.approx(3.0 * (1.5 ** 2 + 2.0), rel=1e-15)
    assert g_norm_bound(1, 1, 1, 0.0, 1) == 1.0
    assert g_norm_bound(1, 1, 2, 0.5, 1) == 9.0
    base = smoothness_bound(1, 1, 1, 3, 0.5)
    for bumped in (smoothness_bound(2, 1, 1, 3, 0.5), smoothness_bound(1, 2, 1, 3, 0.5),
                   smoothness_bound(1, 1, 2, 3, 0.5), smoothness_bound(1, 1, 1, 4, 0.5)):
        assert bumped >= base


def test_iw_variance_diag():
    p = GaussianPolicy.linear(1, 1, features="bias", std="fixed", sigma=1.0)
    env = make_env("bandit")
    batch = sample_batch(env, p, np.zeros(1), 100_000, Streams(2))
    assert iw_variance_diag(batch, p, np.zeros(1), np.zeros(1)) == 0.0
    values = [iw_variance_diag(batch, p, np.zeros(1), np.array([d])) for d in (0.1, 0.2, 0.4)]
    assert values[0] < values[1] < values[2]
    with pytest.raises(ValueError):
        iw_variance_diag(batch.take([0]), p, np.zeros(1), np.ones(1))


def test_reinforce_variance_bound_holds_on_bandit(bandit, bandit_policy):
    batch = _bandit_batch(bandit, bandit_policy, 0.0, 10_000)
    est = reinforce_grad(batch, bandit_policy, THETA0, bandit.discount)
    for N in (1, 10):
        bound = reinforce_variance_bound(bandit.reward_bound, 1.0, 1, bandit.discount, 0.5, N)
        assert est.trace_cov / N <= bound
