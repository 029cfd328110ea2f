"""Gaussian policies with linear or tanh-MLP means.

Parameters live in one flat vector. Gradients are hand-written reverse mode
through the two fixed architectures and return one row per sample. Matrix
products are accumulated term by term so a row's result never depends on
how many other rows share the call (this keeps batched rollouts bit-identical
to single ones).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .envs import Environment, Trajectory, TrajectoryBatch, as_batch
from .errors import ConfigError

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
LOG_RATIO_CAP = 30.0


def _affine(X: np.ndarray, W: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.broadcast_to(b, (X.shape[0], W.shape[1])).copy()
    for k in range(W.shape[0]):
        out += X[:, k:k + 1] * W[k]
    return out


def _back_affine(delta: np.ndarray, W: np.ndarray) -> np.ndarray:
    """``delta @ W.T`` with fixed accumulation order."""
    out = delta[:, :1] * W[:, 0]
    for j in range(1, W.shape[1]):
        out += delta[:, j:j + 1] * W[:, j]
    return out


FEATURES = {
    "bias": lambda S: np.ones((S.shape[0], 1)),
    "identity": lambda S: S,
    "affine": lambda S: np.concatenate([S, np.ones((S.shape[0], 1))], axis=1),
}


class LinearMean:
    """``mu(s) = phi(s) @ W`` for a fixed feature rule."""

    kind = "linear"

    def __init__(self, state_dim: int, action_dim: int, features: str = "affine",
                 feature_bound: float | None = None):
        if features not in FEATURES:
            raise ConfigError(f"unknown feature rule {features!r}; expected one of {sorted(FEATURES)}")
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.features = features
        self.n_features = {"bias": 1, "identity": state_dim, "affine": state_dim + 1}[features]
        if feature_bound is None and features == "bias":
            feature_bound = 1.0
        self.feature_bound = feature_bound
        self.n_params = self.n_features * action_dim

    def layout(self):
        return [("W", (self.n_features, self.action_dim))]

    def init(self, rng: np.random.Generator) -> np.ndarray:
        lim = 1.0 / math.sqrt(self.n_features)
        return rng.uniform(-lim, lim, size=self.n_params)

    def forward(self, w: np.ndarray, S: np.ndarray):
        phi = FEATURES[self.features](S)
        W = w.reshape(self.n_features, self.action_dim)
        return _affine(phi, W, np.zeros(self.action_dim)), phi

    def backward(self, w: np.ndarray, phi: np.ndarray, dmu: np.ndarray) -> np.ndarray:
        return (phi[:, :, None] * dmu[:, None, :]).reshape(len(phi), -1)


class MlpMean:
    """Fully connected tanh network with a linear output head."""

    kind = "mlp"
    feature_bound = None

    def __init__(self, state_dim: int, action_dim: int, hidden=(8,)):
        hidden = tuple(int(h) for h in hidden)
        if any(h < 1 for h in hidden):
            raise ConfigError(f"hidden widths must be positive, got {hidden}")
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.hidden = hidden
        self.sizes = (state_dim,) + hidden + (action_dim,)
        self.n_params = sum(i * o + o for i, o in zip(self.sizes[:-1], self.sizes[1:]))

    def layout(self):
        out = []
        for l, (i, o) in enumerate(zip(self.sizes[:-1], self.sizes[1:])):
            out += [(f"W{l}", (i, o)), (f"b{l}", (o,))]
        return out

    def _unpack(self, w):
        layers, pos = [], 0
        for i, o in zip(self.sizes[:-1], self.sizes[1:]):
            W = w[pos:pos + i * o].reshape(i, o)
            pos += i * o
            b = w[pos:pos + o]
            pos += o
            layers.append((W, b))
        return layers

    def init(self, rng: np.random.Generator) -> np.ndarray:
        parts = []
        for i, o in zip(self.sizes[:-1], self.sizes[1:]):
            lim = 1.0 / math.sqrt(i)
            parts += [rng.uniform(-lim, lim, size=i * o), np.zeros(o)]
        return np.concatenate(parts)

    def forward(self, w, S):
        layers = self._unpack(w)
        acts = [S]
        h = S
        for l, (W, b) in enumerate(layers):
            h = _affine(h, W, b)
            if l < len(layers) - 1:
                h = np.tanh(h)
            acts.append(h)
        return h, acts

    def backward(self, w, acts, dmu):
        layers = self._unpack(w)
        n = len(dmu)
        grads = []
        delta = dmu
        for l in range(len(layers) - 1, -1, -1):
            W, _ = layers[l]
            x = acts[l]
            grads.append(delta)
            grads.append((x[:, :, None] * delta[:, None, :]).reshape(n, -1))
            if l > 0:
                delta = _back_affine(delta, W) * (1.0 - acts[l] ** 2)
        return np.concatenate(grads[::-1], axis=1)


class GaussianPolicy:
    """Diagonal Gaussian policy ``a ~ N(mu_theta(s), diag(sigma^2))``.

    With ``std="learned"`` the last ``action_dim`` parameters are
    ``log(sigma)``; with ``std="fixed"`` sigma is a constant of the policy.
    """

    def __init__(self, mean: LinearMean | MlpMean, std: str = "fixed", sigma=1.0):
        if std not in ("fixed", "learned"):
            raise ConfigError(f"std mode must be 'fixed' or 'learned', got {std!r}")
        self.mean_fn = mean
        self.state_dim = mean.state_dim
        self.action_dim = mean.action_dim
        self.std = std
        self.sigma0 = np.broadcast_to(np.asarray(sigma, dtype=float), (self.action_dim,)).copy()
        if not (self.sigma0 > 0).all():
            raise ConfigError(f"sigma must be positive, got {sigma}")
        self.dim = mean.n_params + (self.action_dim if std == "learned" else 0)

    @classmethod
    def linear(cls, state_dim, action_dim, features="affine", feature_bound=None, std="fixed", sigma=1.0):
        return cls(LinearMean(state_dim, action_dim, features, feature_bound), std, sigma)

    @classmethod
    def mlp(cls, state_dim, action_dim, hidden=(8,), std="learned", sigma=1.0):
        return cls(MlpMean(state_dim, action_dim, hidden), std, sigma)

    @classmethod
    def for_env(cls, env: Environment, architecture="mlp", **kwargs):
        builder = cls.mlp if architecture == "mlp" else cls.linear
        return builder(env.state_dim, env.action_dim, **kwargs)

    # -- parameter plumbing

    def layout(self) -> list[tuple[str, slice, tuple]]:
        out, pos = [], 0
        entries = list(self.mean_fn.layout())
        if self.std == "learned":
            entries.append(("log_std", (self.action_dim,)))
        for name, shape in entries:
            size = int(np.prod(shape))
            out.append((name, slice(pos, pos + size), shape))
            pos += size
        return out

    def unpack(self, params) -> dict[str, np.ndarray]:
        return {name: params[sl].reshape(shape) for name, sl, shape in self.layout()}

    def pack(self, parts: dict[str, np.ndarray]) -> np.ndarray:
        return np.concatenate([np.ravel(parts[name]) for name, _, _ in self.layout()])

    def init_params(self, rng: np.random.Generator) -> np.ndarray:
        w = self.mean_fn.init(rng)
        if self.std == "learned":
            w = np.concatenate([w, np.log(self.sigma0)])
        return w

    def check_params(self, params) -> None:
        params = np.asarray(params)
        if params.shape != (self.dim,):
            raise ValueError(f"parameter vector has shape {params.shape}, policy expects ({self.dim},)")
        if not np.isfinite(params).all():
            raise ValueError("parameter vector contains non-finite entries")

    def _mean_params(self, params):
        return params[:self.mean_fn.n_params]

    def log_sigma(self, params) -> np.ndarray:
        if self.std == "learned":
            return np.asarray(params[self.mean_fn.n_params:], dtype=float)
        return np.log(self.sigma0)

    def sigma(self, params) -> np.ndarray:
        if self.std == "learned":
            return np.exp(self.log_sigma(params))
        return self.sigma0

    # -- per-sample quantities (rows of S and A)

    def mean(self, params, S) -> np.ndarray:
        S = np.atleast_2d(np.asarray(S, dtype=float))
        mu, _ = self.mean_fn.forward(self._mean_params(params), S)
        return mu

    def action_from_noise(self, params, S, Z) -> np.ndarray:
        mu = self.mean(params, S)
        if not np.isfinite(mu).all():
            raise FloatingPointError("policy mean is not finite")
        return mu + self.sigma(params) * Z

    def sample_action(self, params, state, rng: np.random.Generator) -> np.ndarray:
        z = rng.standard_normal((1, self.action_dim))
        return self.action_from_noise(params, np.asarray(state, dtype=float)[None], z)[0]

    def log_prob(self, params, S, A):
        """Gaussian log-density; scalar for a single state, else one value per row."""
        single = np.ndim(S) == 1
        S = np.atleast_2d(np.asarray(S, dtype=float))
        A = np.asarray(A, dtype=float).reshape(len(S), self.action_dim)
        mu = self.mean(params, S)
        log_sig = self.log_sigma(params)
        z = (A - mu) / np.exp(log_sig) if self.std == "learned" else (A - mu) / self.sigma0
        lp = (-0.5 * z ** 2 - log_sig - LOG_SQRT_2PI).sum(axis=1)
        return float(lp[0]) if single else lp

    def score(self, params, S, A) -> np.ndarray:
        """Gradient of ``log_prob`` with respect to the flat parameters."""
        single = np.ndim(S) == 1
        S = np.atleast_2d(np.asarray(S, dtype=float))
        A = np.asarray(A, dtype=float).reshape(len(S), self.action_dim)
        w = self._mean_params(params)
        mu, cache = self.mean_fn.forward(w, S)
        sig = self.sigma(params)
        resid = A - mu
        grad = self.mean_fn.backward(w, cache, resid / sig ** 2)
        if self.std == "learned":
            grad = np.concatenate([grad, (resid / sig) ** 2 - 1.0], axis=1)
        return grad[0] if single else grad


# -- trajectory-level quantities


def _flat_steps(batch: TrajectoryBatch):
    n, H = batch.rewards.shape
    S = batch.states[:, :H].reshape(n * H, -1)
    A = batch.actions.reshape(n * H, -1)
    return S, A


def step_log_probs(policy: GaussianPolicy, params, batch: TrajectoryBatch) -> np.ndarray:
    """``(n, H)`` per-step log-densities, zero past each trajectory's end."""
    n, H = batch.rewards.shape
    S, A = _flat_steps(batch)
    lp = policy.log_prob(params, S, A).reshape(n, H)
    return np.where(batch.mask, lp, 0.0)


def step_scores(policy: GaussianPolicy, params, batch: TrajectoryBatch) -> np.ndarray:
    """``(n, H, d)`` per-step scores, zero past each trajectory's end."""
    n, H = batch.rewards.shape
    S, A = _flat_steps(batch)
    sc = policy.score(params, S, A).reshape(n, H, -1)
    return np.where(batch.mask[:, :, None], sc, 0.0)


def _prefix(traj: Trajectory, up_to):
    T = len(traj)
    end = T if up_to is None else up_to + 1
    if end > T:
        raise IndexError(f"up_to={up_to} outside trajectory of length {T}")
    return max(end, 0)


def traj_log_prob(policy: GaussianPolicy, params, traj: Trajectory, up_to: int | None = None) -> float:
    """Sum of log pi over steps ``0..up_to`` (all steps by default)."""
    end = _prefix(traj, up_to)
    if end == 0:
        return 0.0
    return float(np.sum(policy.log_prob(params, traj.states[:end], traj.actions[:end])))


def traj_score_sum(policy: GaussianPolicy, params, traj: Trajectory, up_to: int | None = None) -> np.ndarray:
    end = _prefix(traj, up_to)
    if end == 0:
        return np.zeros(policy.dim)
    return policy.score(params, traj.states[:end], traj.actions[:end]).sum(axis=0)


def _capped_exp(log_ratio, cap):
    log_ratio = np.asarray(log_ratio, dtype=float)
    capped = np.abs(log_ratio) > cap
    return np.exp(np.clip(log_ratio, -cap, cap)), int(np.count_nonzero(capped))


def importance_weight(policy: GaussianPolicy, target, behavior, traj: Trajectory,
                      up_to: int | None = None, cap: float = LOG_RATIO_CAP) -> float:
    """``prod_t pi_target(a_t|s_t) / pi_behavior(a_t|s_t)`` over the prefix.

    The product is formed in log space and exponentiated once; the
    log-ratio is clipped to ``[-cap, cap]``.
    """
    end = _prefix(traj, up_to)
    if end == 0:
        return 1.0
    lr = (policy.log_prob(target, traj.states[:end], traj.actions[:end])
          - policy.log_prob(behavior, traj.states[:end], traj.actions[:end]))
    w, _ = _capped_exp(np.sum(lr), cap)
    return float(w)


def step_log_ratios(policy, target, behavior, batch: TrajectoryBatch) -> np.ndarray:
    return step_log_probs(policy, target, batch) - step_log_probs(policy, behavior, batch)


def importance_weights(policy, target, behavior, trajs, cap: float = LOG_RATIO_CAP):
    """Full-trajectory weights for a batch; returns ``(weights, n_capped)``."""
    batch = as_batch(trajs)
    return _capped_exp(step_log_ratios(policy, target, behavior, batch).sum(axis=1), cap)


def prefix_importance_weights(policy, target, behavior, trajs, cap: float = LOG_RATIO_CAP):
    """``(n, H)`` weights of prefixes ``z_{0:h}``; returns ``(weights, n_capped)``.

    Past a trajectory's end the entries repeat the full weight.
    """
    batch = as_batch(trajs)
    return _capped_exp(np.cumsum(step_log_ratios(policy, target, behavior, batch), axis=1), cap)


def gaussian_assumption_constants(policy: GaussianPolicy, env: Environment) -> tuple[float, float]:
    """Score and Hessian bounds ``(G, F)`` for a linear-mean, fixed-sigma policy.

    ``G = M_phi * |A| / sigma^2`` and ``F = M_phi^2 / sigma^2``, with ``|A|``
    the action interval width (widest dimension, smallest sigma when the
    action is multi-dimensional).
    """
    if not isinstance(policy.mean_fn, LinearMean):
        raise ValueError("closed-form constants exist only for linear-mean policies")
    if policy.std != "fixed":
        raise ValueError("closed-form constants require a fixed standard deviation")
    if policy.mean_fn.feature_bound is None:
        raise ValueError("linear policy has no declared feature bound M_phi")
    clip = env.action_clip
    if clip is None:
        raise ValueError("closed-form constants require a bounded action interval")
    width = float(np.max(clip[1] - clip[0]))
    m_phi = float(policy.mean_fn.feature_bound)
    var = float(np.min(policy.sigma0)) ** 2
    return m_phi * width / var, m_phi ** 2 / var
