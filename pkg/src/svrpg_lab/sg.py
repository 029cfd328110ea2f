"""Plain stochastic policy gradient with a single ADAM instance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .adam import AdamState, adam_update, effective_rate
from .envs import Environment, sample_batch
from .errors import ConfigError
from .estimators import ESTIMATORS, NO_BASELINE, fit_linear_baseline, policy_gradient
from .history import IterateHistory, IterateRecord
from .policy import GaussianPolicy
from .rng import TRAIN, Streams


@dataclass(frozen=True)
class SgConfig:
    batch: int = 10
    budget: int = 10_000
    estimator: str = "gpomdp"
    baseline: str = "none"
    alpha: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.99
    eps: float = 1e-8
    ridge: float = 1e-5
    workers: int = 1

    def __post_init__(self):
        if self.batch < 1:
            raise ConfigError(f"batch must be >= 1, got {self.batch}")
        if self.budget < self.batch:
            raise ConfigError(f"budget ({self.budget}) must be >= batch ({self.batch})")
        if self.estimator not in ESTIMATORS:
            raise ConfigError(f"estimator must be one of {ESTIMATORS}, got {self.estimator!r}")
        if self.baseline not in ("none", "linear"):
            raise ConfigError(f"baseline must be 'none' or 'linear', got {self.baseline!r}")
        if self.alpha <= 0:
            raise ConfigError("alpha must be positive")


def run_sg(env: Environment, policy: GaussianPolicy, theta_0, config: SgConfig,
           rng: Streams) -> IterateHistory:
    """Sample, estimate, refit the baseline, step; repeat while a full batch fits the budget.

    The gradient at iteration ``k`` uses the baseline fitted on batch ``k - 1``.
    """
    theta = np.array(theta_0, dtype=float)
    policy.check_params(theta)
    history = IterateHistory(theta.copy(), config.budget)
    adam = AdamState.zeros(policy.dim, config.alpha, config.beta1, config.beta2, config.eps)
    baseline = NO_BASELINE
    consumed = 0
    k = 0
    while config.budget - consumed >= config.batch:
        trajs = sample_batch(env, policy, theta, config.batch, rng.child(TRAIN, k), config.workers)
        consumed += config.batch
        est = policy_gradient(trajs, policy, theta, env.discount, config.estimator, baseline)
        if config.baseline == "linear":
            baseline = fit_linear_baseline(trajs, env.discount, config.ridge)
        delta, adam = adam_update(adam, est.vector)
        nxt = theta + delta
        if not np.isfinite(nxt).all():
            raise FloatingPointError(f"parameters became non-finite at iteration {k}")
        history.append(IterateRecord(k, None, "sg", theta, nxt, consumed, config.batch,
                                     float(np.linalg.norm(delta)), fg_rate=effective_rate(adam)))
        theta = nxt
        k += 1
    return history
