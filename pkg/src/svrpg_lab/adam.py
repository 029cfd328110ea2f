"""ADAM increments, the two-instance snapshot/sub-iteration schedule, and
the adaptive snapshot rule."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class AdamState:
    kappa: np.ndarray
    nu: np.ndarray
    t: int = 0
    alpha: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.99
    eps: float = 1e-8

    def __post_init__(self):
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("ADAM decay rates must lie in [0, 1)")
        if self.eps <= 0:
            raise ValueError("ADAM eps must be positive")

    @classmethod
    def zeros(cls, dim: int, alpha: float = 1e-3, beta1: float = 0.9, beta2: float = 0.99,
              eps: float = 1e-8) -> "AdamState":
        return cls(np.zeros(dim), np.zeros(dim), 0, alpha, beta1, beta2, eps)

    @property
    def nu_hat(self) -> np.ndarray:
        return self.nu / (1.0 - self.beta2 ** self.t)


def adam_update(state: AdamState, g) -> tuple[np.ndarray, AdamState]:
    """One ADAM step on gradient ``g``; returns ``(increment, new_state)``.

    The increment is meant to be *added* to the parameters (ascent).
    """
    g = np.asarray(g, dtype=float)
    if g.shape != state.kappa.shape:
        raise ValueError(f"gradient shape {g.shape} does not match state {state.kappa.shape}")
    t = state.t + 1
    kappa = state.beta1 * state.kappa + (1.0 - state.beta1) * g
    nu = state.beta2 * state.nu + (1.0 - state.beta2) * (g * g)
    kappa_hat = kappa / (1.0 - state.beta1 ** t)
    nu_hat = nu / (1.0 - state.beta2 ** t)
    delta = state.alpha / (np.sqrt(nu_hat) + state.eps) * kappa_hat
    return delta, replace(state, kappa=kappa, nu=nu, t=t)


def effective_rate(state: AdamState) -> float:
    """Mean over coordinates of ``alpha / (sqrt(nu_hat) + eps)``."""
    if state.t < 1:
        raise ValueError("effective rate is undefined before the first update")
    return float(np.mean(state.alpha / (np.sqrt(state.nu_hat) + state.eps)))


@dataclass
class DualAdam:
    """Separate ADAM histories for snapshot (full-gradient) and sub-iteration steps.

    The sub-iteration instance runs at half the snapshot rate.
    """

    fg: AdamState
    si: AdamState

    @classmethod
    def create(cls, dim: int, alpha: float, beta1: float = 0.9, beta2: float = 0.99,
               eps: float = 1e-8) -> "DualAdam":
        return cls(AdamState.zeros(dim, alpha, beta1, beta2, eps),
                   AdamState.zeros(dim, alpha / 2.0, beta1, beta2, eps))

    def step(self, kind: str, g) -> np.ndarray:
        return dual_adam_step(kind, self, g)


def dual_adam_step(kind: str, states: DualAdam, g) -> np.ndarray:
    """Route ``g`` to the instance named by ``kind`` and return its increment."""
    if kind == "snapshot":
        delta, states.fg = adam_update(states.fg, g)
    elif kind == "subiteration":
        delta, states.si = adam_update(states.si, g)
    else:
        raise ValueError(f"kind must be 'snapshot' or 'subiteration', got {kind!r}")
    return delta


def should_take_snapshot(fg_state: AdamState, si_state: AdamState, N: int, B: int) -> bool:
    """True iff ``rate_FG / N > rate_SI / B`` strictly."""
    if fg_state.t < 1 or si_state.t < 1:
        raise ValueError("both ADAM instances need at least one update")
    return effective_rate(fg_state) / N > effective_rate(si_state) / B
