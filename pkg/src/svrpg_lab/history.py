"""Iterate records shared by the SVRPG and plain policy-gradient runners."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np


@dataclass
class IterateRecord:
    """One parameter update.

    ``theta`` is the iterate at which the gradient was evaluated and
    ``theta_next`` the result of the update. ``consumed`` is the cumulative
    trajectory count after this update's sampling.
    """

    epoch: int
    sub_iter: int | None
    kind: str
    theta: np.ndarray
    theta_next: np.ndarray
    consumed: int
    batch: int
    step_norm: float
    iw_mean: float | None = None
    iw_var: float | None = None
    fg_rate: float | None = None
    si_rate: float | None = None
    degenerate: int = 0
    omega_fallback: bool = False
    wall_ms: float | None = None


@dataclass
class IterateHistory:
    theta0: np.ndarray
    budget: int
    records: list[IterateRecord] = field(default_factory=list)
    _t0: float = field(default_factory=time.perf_counter, repr=False)

    def append(self, rec: IterateRecord) -> None:
        if rec.wall_ms is None:
            rec.wall_ms = (time.perf_counter() - self._t0) * 1e3
        if self.records and rec.consumed < self.records[-1].consumed:
            raise ValueError("trajectory counter must be monotone")
        self.records.append(rec)

    def extend(self, recs) -> None:
        for r in recs:
            self.append(r)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def consumed(self) -> int:
        return self.records[-1].consumed if self.records else 0

    @property
    def final_theta(self) -> np.ndarray:
        return self.records[-1].theta_next if self.records else self.theta0

    @property
    def degenerate_weights(self) -> int:
        return sum(r.degenerate for r in self.records)

    @property
    def omega_fallbacks(self) -> int:
        return sum(r.omega_fallback for r in self.records)

    def theta_after(self, consumed: int) -> tuple[np.ndarray, IterateRecord | None]:
        """Latest parameters available once ``consumed`` trajectories were used."""
        best = None
        for r in self.records:
            if r.consumed <= consumed:
                best = r
            else:
                break
        return (self.theta0, None) if best is None else (best.theta_next, best)

    def epoch_consumption(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for r in self.records:
            out[r.epoch] = out.get(r.epoch, 0) + r.batch
        return out


def select_theta_A(history: IterateHistory, rng: np.random.Generator) -> np.ndarray:
    """Uniform draw over all recorded iterates."""
    if not history.records:
        raise ValueError("empty history")
    return history.records[int(rng.integers(len(history.records)))].theta
