"""Stochastic variance-reduced policy gradient.

Each epoch samples ``N`` trajectories at the snapshot, takes a full-gradient
step with them, then runs sub-iterations on mini-batches of ``B`` fresh
trajectories using the importance-weighted corrected gradient. Steps go
through two ADAM instances; an epoch ends when the adaptive rule asks for a
new snapshot, after ``m_max`` updates, or when the budget runs out.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .adam import DualAdam, effective_rate, should_take_snapshot
from .envs import Environment, TrajectoryBatch, sample_batch
from .errors import BudgetExhausted, ConfigError
from .estimators import (ESTIMATORS, NO_BASELINE, Baseline, GradientEstimate,
                         fit_linear_baseline, per_trajectory_grads, policy_gradient)
from .history import IterateHistory, IterateRecord
from .policy import LOG_RATIO_CAP, GaussianPolicy, importance_weights, prefix_importance_weights
from .rng import TRAIN, Streams

log = logging.getLogger(__name__)

CORRECTIONS = ("per_step", "trajectory")


@dataclass(frozen=True)
class SvrpgConfig:
    N: int = 100
    B: int = 10
    m_max: int = 50
    budget: int = 10_000
    estimator: str = "gpomdp"
    baseline: str = "none"
    self_normalize: bool = False
    adaptive_epoch: bool = True
    alpha: float = 5e-2
    beta1: float = 0.9
    beta2: float = 0.99
    eps: float = 1e-8
    ridge: float = 1e-5
    weight_cap: float = LOG_RATIO_CAP
    # "per_step": G(PO)MDP terms use prefix weights w(z_{0:h});
    # "trajectory": every term uses the full-trajectory weight.
    correction: str = "per_step"
    workers: int = 1
    # Off only in tests: sample B trajectories at t = 0 as well.
    fg_variant: bool = True

    def __post_init__(self):
        if not 1 <= self.B <= self.N:
            raise ConfigError(f"need 1 <= B <= N, got B={self.B}, N={self.N}")
        if self.m_max < 1:
            raise ConfigError(f"m_max must be >= 1, got {self.m_max}")
        if self.budget < self.N:
            raise ConfigError(f"budget ({self.budget}) must be >= N ({self.N})")
        if self.estimator not in ESTIMATORS:
            raise ConfigError(f"estimator must be one of {ESTIMATORS}, got {self.estimator!r}")
        if self.baseline not in ("none", "linear"):
            raise ConfigError(f"baseline must be 'none' or 'linear', got {self.baseline!r}")
        if self.alpha <= 0:
            raise ConfigError("alpha must be positive")
        if self.correction not in CORRECTIONS:
            raise ConfigError(f"correction must be one of {CORRECTIONS}, got {self.correction!r}")


@dataclass
class SnapshotState:
    theta_tilde: np.ndarray
    mu_tilde: GradientEstimate
    baseline: Baseline
    snapshot_trajs_consumed: int
    trajectories: TrajectoryBatch | None = None


@dataclass
class CorrectedGradient:
    v: np.ndarray
    correction: np.ndarray
    weights: np.ndarray
    degenerate: int = 0
    fallback: bool = False


@dataclass
class Progress:
    """Budget and stream bookkeeping for one run."""

    budget: int
    consumed: int = 0
    batches: int = 0
    exhausted: bool = False

    @property
    def remaining(self) -> int:
        return self.budget - self.consumed

    def draw(self, n: int) -> int:
        """Reserve ``n`` trajectories; returns the batch index for the stream."""
        if n > self.remaining:
            raise BudgetExhausted(f"need {n} trajectories, {self.remaining} left")
        self.consumed += n
        self.batches += 1
        return self.batches - 1


def take_snapshot(env: Environment, policy: GaussianPolicy, theta, config: SvrpgConfig,
                  rng: Streams, progress: Progress, baseline: Baseline = NO_BASELINE) -> SnapshotState:
    """Sample ``N`` trajectories at ``theta`` and estimate the snapshot gradient.

    ``baseline`` is the fit from the previous snapshot; a fresh one is fitted
    on this batch and returned in the state for use until the next snapshot.
    """
    k = progress.draw(config.N)
    trajs = sample_batch(env, policy, theta, config.N, rng.child(TRAIN, k), config.workers)
    mu = policy_gradient(trajs, policy, theta, env.discount, config.estimator, baseline)
    if config.baseline == "linear":
        baseline = fit_linear_baseline(trajs, env.discount, config.ridge)
    return SnapshotState(np.array(theta, dtype=float), mu, baseline, config.N, trajs)


def corrected_gradient(snapshot: SnapshotState, theta_t, minibatch, policy: GaussianPolicy,
                       config: SvrpgConfig, gamma: float) -> CorrectedGradient:
    """Variance-reduced gradient at ``theta_t`` from a mini-batch sampled there.

    ``v = mu_tilde + mean_i[g(tau_i|theta_t) - w_i g(tau_i|theta_tilde)]`` where
    ``w_i g(tau_i|theta_tilde)`` is the off-policy estimator term with target
    ``theta_tilde`` and behavior ``theta_t``: the full-trajectory weight for
    REINFORCE, per-step prefix weights for G(PO)MDP (unless ``correction`` is
    ``"trajectory"``). Self-normalized mode divides the weighted sum by the
    sum of weights instead of ``B``; with prefix weights the step-``h`` terms
    are divided by the sum of the step-``h`` weights.
    """
    theta_s = snapshot.theta_tilde
    baseline = snapshot.baseline
    mu = snapshot.mu_tilde.vector
    g_now = per_trajectory_grads(minibatch, policy, theta_t, gamma, config.estimator, baseline)
    if config.estimator == "gpomdp" and config.correction == "per_step":
        wp, n_capped = prefix_importance_weights(policy, theta_s, theta_t, minibatch, config.weight_cap)
        w = wp[:, -1]
        if config.self_normalize:
            omega = wp.sum(axis=0)
            if not (np.all(omega > 0) and np.all(np.isfinite(omega))):
                return _fallback(mu, w, n_capped, omega.min())
            wp = wp * (len(wp) / omega)
        g_snap = per_trajectory_grads(minibatch, policy, theta_s, gamma, "gpomdp", baseline,
                                      prefix_weights=wp)
        correction = (g_now - g_snap).mean(axis=0)
        return CorrectedGradient(mu + correction, correction, w, n_capped)
    w, n_capped = importance_weights(policy, theta_s, theta_t, minibatch, config.weight_cap)
    g_snap = per_trajectory_grads(minibatch, policy, theta_s, gamma, config.estimator, baseline)
    if not config.self_normalize:
        correction = (g_now - w[:, None] * g_snap).mean(axis=0)
        return CorrectedGradient(mu + correction, correction, w, n_capped)
    omega = w.sum()
    if not (omega > 0 and np.isfinite(omega)):
        return _fallback(mu, w, n_capped, omega)
    correction = g_now.mean(axis=0) - (w[:, None] * g_snap).sum(axis=0) / omega
    return CorrectedGradient(mu + correction, correction, w, n_capped)


def _fallback(mu, w, n_capped, omega) -> CorrectedGradient:
    log.warning("importance weights collapsed (sum=%r); using snapshot gradient alone", omega)
    return CorrectedGradient(mu.copy(), np.zeros_like(mu), w, n_capped, fallback=True)


def _rates(schedule: DualAdam):
    fg = effective_rate(schedule.fg) if schedule.fg.t else None
    si = effective_rate(schedule.si) if schedule.si.t else None
    return fg, si


def _check_finite(theta, epoch, t):
    if not np.isfinite(theta).all():
        raise FloatingPointError(f"parameters became non-finite at epoch {epoch}, sub-iteration {t}")


def run_epoch(snapshot: SnapshotState, env: Environment, policy: GaussianPolicy, config: SvrpgConfig,
              schedule: DualAdam, rng: Streams, progress: Progress, epoch: int = 0):
    """Full-gradient step followed by sub-iterations; returns ``(theta, records)``."""
    theta = snapshot.theta_tilde.copy()
    records: list[IterateRecord] = []
    mu = snapshot.mu_tilde

    if config.fg_variant:
        delta = schedule.step("snapshot", mu.vector)
        fg, si = _rates(schedule)
        records.append(IterateRecord(epoch, 0, "snapshot", theta, theta + delta, progress.consumed,
                                     config.N, float(np.linalg.norm(delta)), fg_rate=fg, si_rate=si))
        theta = theta + delta
        _check_finite(theta, epoch, 0)
        t = 1
    else:
        t = 0

    while t < config.m_max:
        if progress.remaining < config.B:
            progress.exhausted = True
            break
        if (config.adaptive_epoch and t > 1 and schedule.si.t >= 1
                and should_take_snapshot(schedule.fg, schedule.si, config.N, config.B)):
            break
        k = progress.draw(config.B)
        mb = sample_batch(env, policy, theta, config.B, rng.child(TRAIN, k), config.workers)
        cg = corrected_gradient(snapshot, theta, mb, policy, config, env.discount)
        kind = "subiteration" if t > 0 else "snapshot"
        delta = schedule.step(kind, cg.v)
        fg, si = _rates(schedule)
        batch = config.B + (config.N if t == 0 else 0)
        records.append(IterateRecord(
            epoch, t, kind, theta, theta + delta, progress.consumed, batch,
            float(np.linalg.norm(delta)), iw_mean=float(cg.weights.mean()),
            iw_var=float(cg.weights.var(ddof=1)) if len(cg.weights) > 1 else None,
            fg_rate=fg, si_rate=si, degenerate=cg.degenerate, omega_fallback=cg.fallback))
        theta = theta + delta
        _check_finite(theta, epoch, t)
        t += 1
    return theta, records


def run(env: Environment, policy: GaussianPolicy, theta_0, config: SvrpgConfig,
        rng: Streams) -> IterateHistory:
    """Alternate snapshots and epochs until fewer than ``N`` trajectories remain."""
    theta = np.array(theta_0, dtype=float)
    policy.check_params(theta)
    history = IterateHistory(theta.copy(), config.budget)
    schedule = DualAdam.create(policy.dim, config.alpha, config.beta1, config.beta2, config.eps)
    progress = Progress(config.budget)
    baseline = NO_BASELINE
    epoch = 0
    while progress.remaining >= config.N and not progress.exhausted:
        snap = take_snapshot(env, policy, theta, config, rng, progress, baseline)
        baseline = snap.baseline
        theta, records = run_epoch(snap, env, policy, config, schedule, rng, progress, epoch)
        history.extend(records)
        log.debug("epoch %d: %d updates, %d trajectories used", epoch, len(records), progress.consumed)
        epoch += 1
    return history
