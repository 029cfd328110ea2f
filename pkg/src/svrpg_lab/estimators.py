"""REINFORCE and G(PO)MDP gradient estimators, baselines, and bound formulas."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .envs import TrajectoryBatch, as_batch
from .policy import (GaussianPolicy, LOG_RATIO_CAP, importance_weights,
                     prefix_importance_weights, step_scores)

ESTIMATORS = ("reinforce", "gpomdp")


@dataclass
class GradientEstimate:
    """Average of per-trajectory gradient terms.

    ``per_trajectory`` keeps the ``(n, d)`` individual terms; ``degenerate``
    counts importance weights whose log-ratio hit the cap.
    """

    vector: np.ndarray
    n: int
    trace_cov: float | None = None
    per_trajectory: np.ndarray | None = field(default=None, repr=False)
    degenerate: int = 0


@dataclass(frozen=True)
class Baseline:
    """State-value baseline ``b(s, t) = lambda @ phi(s, t)``.

    ``phi(s, t) = [s, s*s, 0.01t, (0.01t)^2, (0.01t)^3, 1]``.
    """

    kind: str = "none"
    weights: np.ndarray | None = None
    ridge: float = 1e-5

    def __post_init__(self):
        if self.kind not in ("none", "linear"):
            raise ValueError(f"unknown baseline kind {self.kind!r}")
        if self.kind == "linear" and self.weights is None:
            raise ValueError("linear baseline needs weights")

    @classmethod
    def constant(cls, value: float, state_dim: int) -> "Baseline":
        w = np.zeros(2 * state_dim + 4)
        w[-1] = value
        return cls("linear", w)

    def values(self, batch: TrajectoryBatch) -> np.ndarray:
        """``(n, H)`` baseline values at every real step, zero elsewhere."""
        if self.kind == "none":
            return np.zeros(batch.rewards.shape)
        phi = baseline_features(batch.states[:, :batch.horizon])
        if phi.shape[-1] != len(self.weights):
            raise ValueError(f"baseline has {len(self.weights)} weights, features have {phi.shape[-1]}")
        return np.where(batch.mask, phi @ self.weights, 0.0)


NO_BASELINE = Baseline()


def baseline_features(states: np.ndarray) -> np.ndarray:
    """Time-varying features for ``(n, H, state_dim)`` states; step index is the axis-1 position."""
    n, H, _ = states.shape
    t = np.broadcast_to((0.01 * np.arange(H))[None, :, None], (n, H, 1))
    ones = np.ones((n, H, 1))
    return np.concatenate([states, states * states, t, t ** 2, t ** 3, ones], axis=-1)


def returns_to_go(batch: TrajectoryBatch, gamma: float) -> np.ndarray:
    out = np.zeros(batch.rewards.shape)
    acc = np.zeros(batch.n)
    for t in range(batch.horizon - 1, -1, -1):
        acc = batch.rewards[:, t] + gamma * acc
        out[:, t] = acc
    return np.where(batch.mask, out, 0.0)


def fit_linear_baseline(trajs, gamma: float, ridge: float = 1e-5) -> Baseline:
    """Ridge regression of discounted return-to-go on the baseline features.

    All steps of all trajectories are pooled; the normal equations are
    averaged over rows so that duplicating the data leaves the fit unchanged.
    """
    batch = as_batch(trajs)
    mask = batch.mask
    phi = baseline_features(batch.states[:, :batch.horizon])[mask]
    y = returns_to_go(batch, gamma)[mask]
    m = len(y)
    gram = phi.T @ phi / m + ridge * np.eye(phi.shape[1])
    weights = np.linalg.solve(gram, phi.T @ y / m)
    return Baseline("linear", weights, ridge)


def _step_credits(batch, gamma, baseline):
    """``gamma^h r_h - b(s_h, h)`` per step."""
    disc = gamma ** np.arange(batch.horizon)
    return batch.rewards * disc - (baseline or NO_BASELINE).values(batch)


def per_trajectory_grads(trajs, policy: GaussianPolicy, params, gamma: float, estimator: str,
                         baseline: Baseline | None = None, weights=None, prefix_weights=None):
    """``(n, d)`` matrix of single-trajectory gradient terms ``g(tau|theta)``.

    ``weights`` (full-trajectory, REINFORCE) or ``prefix_weights`` (per step,
    G(PO)MDP) multiply the terms for off-policy use.
    """
    batch = as_batch(trajs)
    scores = step_scores(policy, params, batch)
    credit = _step_credits(batch, gamma, baseline)
    if estimator == "reinforce":
        g = scores.sum(axis=1) * credit.sum(axis=1)[:, None]
        if weights is not None:
            g = g * weights[:, None]
    elif estimator == "gpomdp":
        terms = np.cumsum(scores, axis=1) * credit[:, :, None]
        if prefix_weights is not None:
            terms = terms * prefix_weights[:, :, None]
        g = terms.sum(axis=1)
    else:
        raise ValueError(f"unknown estimator {estimator!r}; expected one of {ESTIMATORS}")
    return g


def _estimate(per_traj, degenerate=0) -> GradientEstimate:
    n = len(per_traj)
    if n == 0:
        raise ValueError("empty trajectory set")
    trace = estimator_variance(per_traj) if n >= 2 else None
    return GradientEstimate(per_traj.mean(axis=0), n, trace, per_traj, degenerate)


def reinforce_grad(trajs, policy, params, gamma, baseline=None) -> GradientEstimate:
    return _estimate(per_trajectory_grads(trajs, policy, params, gamma, "reinforce", baseline))


def gpomdp_grad(trajs, policy, params, gamma, baseline=None) -> GradientEstimate:
    return _estimate(per_trajectory_grads(trajs, policy, params, gamma, "gpomdp", baseline))


def offpolicy_reinforce_grad(trajs, policy, behavior, target, gamma, baseline=None,
                             cap: float = LOG_RATIO_CAP) -> GradientEstimate:
    """Target-policy REINFORCE from behavior samples, full-trajectory weights."""
    w, n_capped = importance_weights(policy, target, behavior, trajs, cap)
    g = per_trajectory_grads(trajs, policy, target, gamma, "reinforce", baseline, weights=w)
    return _estimate(g, n_capped)


def offpolicy_gpomdp_grad(trajs, policy, behavior, target, gamma, baseline=None,
                          cap: float = LOG_RATIO_CAP) -> GradientEstimate:
    """Target-policy G(PO)MDP from behavior samples, step ``h`` weighted by ``w(z_{0:h})``."""
    w, n_capped = prefix_importance_weights(policy, target, behavior, trajs, cap)
    g = per_trajectory_grads(trajs, policy, target, gamma, "gpomdp", baseline, prefix_weights=w)
    return _estimate(g, n_capped)


def policy_gradient(trajs, policy, params, gamma, estimator, baseline=None) -> GradientEstimate:
    return _estimate(per_trajectory_grads(trajs, policy, params, gamma, estimator, baseline))


def estimator_variance(per_traj) -> float:
    """Unbiased trace of the covariance of per-trajectory gradient terms."""
    per_traj = np.asarray(per_traj, dtype=float)
    if per_traj.ndim == 1:
        per_traj = per_traj[:, None]
    if len(per_traj) < 2:
        raise ValueError("need at least 2 samples for a variance")
    return float(per_traj.var(axis=0, ddof=1).sum())


# -- bound formulas


def _horizon_factor(H, gamma):
    return (1.0 - gamma ** H) / (1.0 - gamma)


def smoothness_bound(G: float, F: float, R: float, H: int, gamma: float) -> float:
    """Hessian-norm bound ``(1 - g^H)/(1 - g) * R * H * (H G^2 + F)`` on J."""
    return _horizon_factor(H, gamma) * R * H * (H * G ** 2 + F)


def g_norm_bound(G: float, R: float, H: int, gamma: float, d: int) -> float:
    """Bound on ``||g(tau|theta)||^2``: ``H^2 G^2 ((1 - g^H)/(1 - g))^2 R^2 d``."""
    return H ** 2 * G ** 2 * _horizon_factor(H, gamma) ** 2 * R ** 2 * d


def reinforce_variance_bound(R: float, M_phi: float, H: int, gamma: float, sigma: float, N: int = 1) -> float:
    """Per-component variance bound of the N-trajectory REINFORCE estimate."""
    return R ** 2 * M_phi ** 2 * H * (1.0 - gamma ** H) ** 2 / (N * sigma ** 2 * (1.0 - gamma) ** 2)


def iw_variance_diag(trajs, policy, theta_1, theta_2, cap: float = LOG_RATIO_CAP) -> float:
    """Sample variance of ``w(tau) = p(tau|theta_2) / p(tau|theta_1)``, tau ~ theta_1."""
    w, _ = importance_weights(policy, theta_2, theta_1, trajs, cap)
    if len(w) < 2:
        raise ValueError("need at least 2 trajectories")
    return float(np.var(w, ddof=1))


@dataclass
class DiagnosticBounds:
    G: float | None
    F: float | None
    V_bound: float | None
    L_J: float | None
    Gamma: float | None
    W_hat: float | None
