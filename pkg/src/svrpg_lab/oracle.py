"""Ground truth for tests: the analytic bandit plus brute-force Monte Carlo
and common-random-number finite differences."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .envs import GaussianBandit, discounted_returns, sample_batch
from .estimators import per_trajectory_grads
from .rng import Streams


@dataclass
class OracleResult:
    value: np.ndarray | float
    std_error: np.ndarray | float
    n: int


def bandit_analytic(theta: float, c: float, sigma: float,
                    clip: tuple[float, float] | None = None) -> tuple[float, float]:
    """``J = -((theta - c)^2 + sigma^2)`` and ``dJ/dtheta = -2 (theta - c)``.

    Clipping is ignored by the formula, so with ``clip`` given the call
    refuses means whose 4-sigma band leaves the interval.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if clip is not None:
        lo, hi = clip
        if theta - 4 * sigma < lo or theta + 4 * sigma > hi:
            raise ValueError(f"theta={theta} with sigma={sigma} leaves the clip interval {clip}; "
                             "closed form does not apply")
    return -((theta - c) ** 2 + sigma ** 2), -2.0 * (theta - c)


def bandit_oracle(env: GaussianBandit, theta: float, sigma: float):
    return bandit_analytic(theta, env.c, sigma, (float(env.action_low[0]), float(env.action_high[0])))


def mc_performance(env, policy, params, M: int, rng: Streams) -> OracleResult:
    """Sample mean of discounted returns over ``M`` rollouts."""
    if M < 2:
        raise ValueError("M must be >= 2")
    returns = discounted_returns(sample_batch(env, policy, params, M, rng), env.discount)
    return OracleResult(float(returns.mean()), float(returns.std(ddof=1) / np.sqrt(M)), M)


def mc_gradient(env, policy, params, M: int, estimator: str, rng: Streams, baseline=None) -> OracleResult:
    if M < 2:
        raise ValueError("M must be >= 2")
    trajs = sample_batch(env, policy, params, M, rng)
    g = per_trajectory_grads(trajs, policy, params, env.discount, estimator, baseline)
    return OracleResult(g.mean(axis=0), g.std(axis=0, ddof=1) / np.sqrt(M), M)


def finite_difference_grad(env, policy, params, eps: float, M: int, rng: Streams) -> OracleResult:
    """Central differences of the Monte Carlo return, one coordinate at a time.

    The ``+eps`` and ``-eps`` rollouts share every random stream, so the
    difference is taken per trajectory and its standard error reflects only
    the residual noise.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    params = np.asarray(params, dtype=float)
    d = len(params)
    value = np.empty(d)
    se = np.empty(d)
    for i in range(d):
        e = np.zeros(d)
        e[i] = eps
        up = discounted_returns(sample_batch(env, policy, params + e, M, rng), env.discount)
        down = discounted_returns(sample_batch(env, policy, params - e, M, rng), env.discount)
        diff = (up - down) / (2 * eps)
        value[i] = diff.mean()
        se[i] = diff.std(ddof=1) / np.sqrt(M)
    return OracleResult(value, se, M)
