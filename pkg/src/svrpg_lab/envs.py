"""Episodic continuous MDPs, trajectories, and batched rollouts."""

from __future__ import annotations

import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, RolloutError
from .rng import Streams


class Environment:
    """Base class for the built-in environments.

    Subclasses implement ``_reset`` and ``_step``. ``_step`` is batched over
    rows and deterministic: all randomness of an episode enters through the
    initial state and the policy noise.
    """

    name: str = "env"
    state_dim: int
    action_dim: int

    def __init__(self, *, horizon: int, discount: float, reward_bound: float,
                 action_low: np.ndarray | None, action_high: np.ndarray | None):
        if horizon < 1:
            raise ConfigError(f"horizon must be >= 1, got {horizon}")
        if not 0.0 <= discount < 1.0:
            raise ConfigError(f"discount must lie in [0, 1), got {discount}")
        self.horizon = int(horizon)
        self.discount = float(discount)
        self.reward_bound = float(reward_bound)
        self.action_low = None if action_low is None else np.asarray(action_low, dtype=float)
        self.action_high = None if action_high is None else np.asarray(action_high, dtype=float)
        self.overrides: dict[str, float] = {}

    @property
    def action_clip(self) -> tuple[np.ndarray, np.ndarray] | None:
        if self.action_low is None:
            return None
        return self.action_low, self.action_high

    def clip_action(self, actions: np.ndarray) -> np.ndarray:
        if self.action_low is None:
            return actions
        return np.clip(actions, self.action_low, self.action_high)

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        return self._reset(rng)

    def step(self, states: np.ndarray, actions: np.ndarray):
        """Advance a batch of states; returns ``(next_states, rewards, terminal)``."""
        states = np.atleast_2d(np.asarray(states, dtype=float))
        actions = np.atleast_2d(np.asarray(actions, dtype=float))
        return self._step(states, actions)

    def is_terminal(self, state: np.ndarray) -> bool:
        """Whether ``state`` ends the episode before the horizon."""
        return False

    def _reset(self, rng):
        raise NotImplementedError

    def _step(self, states, actions):
        raise NotImplementedError

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.overrides})"


class GaussianBandit(Environment):
    """One-step task with a fixed zero state and reward ``-(a - c)^2``."""

    name = "bandit"
    state_dim = 1
    action_dim = 1

    def __init__(self, c: float = 1.0, action_low: float = -5.0, action_high: float = 5.0,
                 gamma: float = 0.99):
        if not action_low < action_high:
            raise ConfigError("bandit action_low must be < action_high")
        self.c = float(c)
        bound = max((action_low - c) ** 2, (action_high - c) ** 2)
        super().__init__(horizon=1, discount=gamma, reward_bound=bound,
                         action_low=np.array([action_low]), action_high=np.array([action_high]))

    def _reset(self, rng):
        return np.zeros(1)

    def _step(self, states, actions):
        rewards = -((actions[:, 0] - self.c) ** 2)
        return np.zeros_like(states), rewards, np.zeros(len(states), dtype=bool)


class PointMass(Environment):
    """Integrator ``s' = s + a`` with quadratic cost."""

    name = "pointmass"
    state_dim = 1
    action_dim = 1
    action_cost = 0.01

    def __init__(self, horizon: int = 50, gamma: float = 0.99, action_bound: float = 1.0,
                 init_bound: float = 1.0):
        if action_bound <= 0 or init_bound < 0:
            raise ConfigError("pointmass bounds must be positive")
        self.init_bound = float(init_bound)
        # Largest reachable |s| at a rewarded step is init + (H - 1) * a_max.
        s_max = init_bound + (horizon - 1) * action_bound
        bound = s_max ** 2 + self.action_cost * action_bound ** 2
        super().__init__(horizon=horizon, discount=gamma, reward_bound=bound,
                         action_low=np.array([-action_bound]), action_high=np.array([action_bound]))

    def _reset(self, rng):
        return rng.uniform(-self.init_bound, self.init_bound, size=1)

    def _step(self, states, actions):
        rewards = -(states[:, 0] ** 2) - self.action_cost * actions[:, 0] ** 2
        return states + actions, rewards, np.zeros(len(states), dtype=bool)


class CartPole(Environment):
    """Continuous cart-pole, state ``(x, theta, x_dot, theta_dot)``.

    Barto-Sutton dynamics with explicit Euler integration; the action is the
    horizontal force on the cart.
    """

    name = "cartpole"
    state_dim = 4
    action_dim = 1
    gravity = 9.8
    cart_mass = 1.0
    pole_mass = 0.1
    half_length = 0.5

    def __init__(self, horizon: int = 100, gamma: float = 0.99, force_bound: float = 10.0,
                 x_threshold: float = 2.4, theta_threshold: float = 0.2, dt: float = 0.02,
                 init_bound: float = 0.05):
        if force_bound <= 0 or dt <= 0 or x_threshold <= 0 or theta_threshold <= 0:
            raise ConfigError("cartpole bounds and dt must be positive")
        self.dt = float(dt)
        self.x_threshold = float(x_threshold)
        self.theta_threshold = float(theta_threshold)
        self.init_bound = float(init_bound)
        # 10 - (1 - cos th) - 1e-5 a^2 lies in [8 - 1e-5 F^2, 10]
        bound = max(10.0, abs(8.0 - 1e-5 * force_bound ** 2))
        super().__init__(horizon=horizon, discount=gamma, reward_bound=bound,
                         action_low=np.array([-force_bound]), action_high=np.array([force_bound]))

    def _reset(self, rng):
        return rng.uniform(-self.init_bound, self.init_bound, size=4)

    def _step(self, states, actions):
        x, th, x_dot, th_dot = states.T
        force = actions[:, 0]
        total_mass = self.cart_mass + self.pole_mass
        pole_ml = self.pole_mass * self.half_length
        cos_th = np.cos(th)
        sin_th = np.sin(th)

        rewards = 10.0 - (1.0 - cos_th) - 1e-5 * force ** 2

        temp = (force + pole_ml * th_dot ** 2 * sin_th) / total_mass
        th_acc = (self.gravity * sin_th - cos_th * temp) / (
            self.half_length * (4.0 / 3.0 - self.pole_mass * cos_th ** 2 / total_mass))
        x_acc = temp - pole_ml * th_acc * cos_th / total_mass

        nxt = np.empty_like(states)
        nxt[:, 0] = x + self.dt * x_dot
        nxt[:, 1] = th + self.dt * th_dot
        nxt[:, 2] = x_dot + self.dt * x_acc
        nxt[:, 3] = th_dot + self.dt * th_acc
        terminal = (np.abs(nxt[:, 0]) > self.x_threshold) | (np.abs(nxt[:, 1]) > self.theta_threshold)
        return nxt, rewards, terminal

    def is_terminal(self, state):
        return bool(abs(state[0]) > self.x_threshold or abs(state[1]) > self.theta_threshold)


ENVIRONMENTS: dict[str, type[Environment]] = {
    "bandit": GaussianBandit,
    "pointmass": PointMass,
    "cartpole": CartPole,
}

OVERRIDE_SCHEMA: dict[str, tuple[str, ...]] = {
    "bandit": ("c", "action_low", "action_high", "gamma"),
    "pointmass": ("horizon", "gamma", "action_bound", "init_bound"),
    "cartpole": ("horizon", "gamma", "force_bound", "x_threshold", "theta_threshold", "dt", "init_bound"),
}

_INT_KEYS = {"horizon"}


def make_env(name: str, overrides: dict | None = None) -> Environment:
    """Build a named environment, applying validated overrides."""
    if name not in ENVIRONMENTS:
        raise ConfigError(f"unknown environment {name!r}; expected one of {sorted(ENVIRONMENTS)}")
    overrides = dict(overrides or {})
    kwargs = {}
    for key, value in overrides.items():
        if key not in OVERRIDE_SCHEMA[name]:
            raise ConfigError(f"env.{key}: not an override of {name!r} "
                              f"(allowed: {', '.join(OVERRIDE_SCHEMA[name])})")
        try:
            value = float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"env.{key}: expected a number, got {value!r}") from None
        if not math.isfinite(value):
            raise ConfigError(f"env.{key}: value must be finite, got {value}")
        if key in _INT_KEYS:
            if value != int(value):
                raise ConfigError(f"env.{key}: expected an integer, got {value}")
            value = int(value)
        kwargs[key] = value
    env = ENVIRONMENTS[name](**kwargs)
    env.overrides = kwargs
    return env


@dataclass(frozen=True)
class Trajectory:
    """One rollout: ``T + 1`` states, ``T`` actions and rewards."""

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray

    def __post_init__(self):
        T = len(self.rewards)
        if len(self.actions) != T or len(self.states) != T + 1:
            raise ValueError(f"inconsistent trajectory lengths: states={len(self.states)}, "
                             f"actions={len(self.actions)}, rewards={T}")

    @property
    def length(self) -> int:
        return len(self.rewards)

    def __len__(self) -> int:
        return len(self.rewards)


@dataclass
class TrajectoryBatch(Sequence):
    """Trajectories stored zero-padded to the horizon.

    ``states`` is ``(n, H + 1, state_dim)``, ``actions`` ``(n, H, action_dim)``,
    ``rewards`` ``(n, H)``; entries past each trajectory's length are zero.
    """

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    lengths: np.ndarray
    _mask: np.ndarray | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return len(self.lengths)

    @property
    def horizon(self) -> int:
        return self.rewards.shape[1]

    @property
    def mask(self) -> np.ndarray:
        """Boolean ``(n, H)`` array marking real steps."""
        if self._mask is None:
            self._mask = np.arange(self.horizon)[None, :] < self.lengths[:, None]
        return self._mask

    def __len__(self) -> int:
        return self.n

    def __getitem__(self, i):
        if isinstance(i, slice):
            idx = np.arange(self.n)[i]
            return TrajectoryBatch(self.states[idx], self.actions[idx], self.rewards[idx],
                                   self.lengths[idx])
        T = int(self.lengths[i])
        return Trajectory(self.states[i, :T + 1], self.actions[i, :T], self.rewards[i, :T])

    def take(self, idx) -> "TrajectoryBatch":
        idx = np.asarray(idx)
        return TrajectoryBatch(self.states[idx], self.actions[idx], self.rewards[idx], self.lengths[idx])

    @classmethod
    def from_trajectories(cls, trajs: Sequence[Trajectory], horizon: int | None = None) -> "TrajectoryBatch":
        if isinstance(trajs, TrajectoryBatch):
            return trajs
        if len(trajs) == 0:
            raise ValueError("empty trajectory set")
        H = max(len(t) for t in trajs) if horizon is None else horizon
        sd = trajs[0].states.shape[-1]
        ad = trajs[0].actions.shape[-1] if trajs[0].actions.ndim > 1 else 1
        n = len(trajs)
        states = np.zeros((n, H + 1, sd))
        actions = np.zeros((n, H, ad))
        rewards = np.zeros((n, H))
        lengths = np.empty(n, dtype=int)
        for i, t in enumerate(trajs):
            T = len(t)
            states[i, :T + 1] = t.states
            actions[i, :T] = np.reshape(t.actions, (T, ad))
            rewards[i, :T] = t.rewards
            lengths[i] = T
        return cls(states, actions, rewards, lengths)

    @classmethod
    def concatenate(cls, parts: Sequence["TrajectoryBatch"]) -> "TrajectoryBatch":
        if len(parts) == 1:
            return parts[0]
        return cls(np.concatenate([p.states for p in parts]),
                   np.concatenate([p.actions for p in parts]),
                   np.concatenate([p.rewards for p in parts]),
                   np.concatenate([p.lengths for p in parts]))


def as_batch(trajs) -> TrajectoryBatch:
    return TrajectoryBatch.from_trajectories(trajs)


def discounted_return(traj: Trajectory, gamma: float) -> float:
    """Sum of ``gamma**t * r_t`` over the trajectory."""
    total = 0.0
    weight = 1.0
    for r in traj.rewards:
        total += weight * r
        weight *= gamma
    return float(total)


def discounted_returns(batch: TrajectoryBatch, gamma: float) -> np.ndarray:
    """Per-trajectory discounted returns of a padded batch."""
    discounts = gamma ** np.arange(batch.horizon)
    return (batch.rewards * discounts).sum(axis=1)


def _rollout(env: Environment, policy, params: np.ndarray,
             generators: Sequence[np.random.Generator], offset: int = 0) -> TrajectoryBatch:
    n = len(generators)
    H = env.horizon
    sd, ad = env.state_dim, env.action_dim
    S = np.zeros((n, H + 1, sd))
    A = np.zeros((n, H, ad))
    R = np.zeros((n, H))
    lengths = np.full(n, H, dtype=int)
    noise = np.empty((n, H, ad))
    for i, gen in enumerate(generators):
        S[i, 0] = env.reset(gen)
        noise[i] = gen.standard_normal((H, ad))

    state = S[:, 0].copy()
    alive = np.arange(n)
    for t in range(H):
        s = state[alive]
        a = env.clip_action(policy.action_from_noise(params, s, noise[alive, t]))
        if not np.isfinite(a).all():
            bad = alive[~np.isfinite(a).all(axis=1)][0]
            raise RolloutError(f"non-finite action in trajectory {bad + offset} at step {t}",
                               index=int(bad + offset), step=t)
        s2, r, term = env.step(s, a)
        if not (np.isfinite(s2).all() and np.isfinite(r).all()):
            bad = alive[~(np.isfinite(s2).all(axis=1) & np.isfinite(r))][0]
            raise RolloutError(f"non-finite state in trajectory {bad + offset} at step {t}",
                               index=int(bad + offset), step=t)
        S[alive, t + 1] = s2
        A[alive, t] = a
        R[alive, t] = r
        state[alive] = s2
        if term.any():
            lengths[alive[term]] = t + 1
            alive = alive[~term]
            if alive.size == 0:
                break
    return TrajectoryBatch(S, A, R, lengths)


def sample_trajectory(env: Environment, policy, params: np.ndarray,
                      rng: np.random.Generator) -> Trajectory:
    """Roll out one episode; the recorded action is the clipped one."""
    policy.check_params(params)
    return _rollout(env, policy, params, [rng])[0]


def sample_batch(env: Environment, policy, params: np.ndarray, n: int, rng: Streams,
                 workers: int = 1) -> TrajectoryBatch:
    """Sample ``n`` trajectories; trajectory ``i`` uses stream ``rng.indexed(i)``.

    The result does not depend on ``workers``.
    """
    if n < 1:
        raise ValueError(f"batch size must be >= 1, got {n}")
    policy.check_params(params)
    gens = rng.trajectory_generators(n)
    if workers <= 1 or n < 2 * workers:
        return _rollout(env, policy, params, gens)
    bounds = np.linspace(0, n, workers + 1).astype(int)
    chunks = [(lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(lambda c: _rollout(env, policy, params, gens[c[0]:c[1]], c[0]), chunks))
    return TrajectoryBatch.concatenate(parts)
