from __future__ import annotations

import numpy as np


def bootstrap_ci(values, level: float = 0.90, resamples: int = 2000,
                 rng: np.random.Generator | None = None) -> tuple[float, float]:
    """Percentile bootstrap interval for the mean of ``values``."""
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 0:
        raise ValueError("bootstrap_ci needs at least one value")
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    if resamples < 1:
        raise ValueError("resamples must be >= 1")
    if np.ptp(values) == 0:
        m = float(values.mean())
        return m, m
    rng = rng if rng is not None else np.random.default_rng(0)
    idx = rng.integers(0, values.size, size=(resamples, values.size))
    means = values[idx].mean(axis=1)
    tail = (1.0 - level) / 2.0
    low, high = np.quantile(means, [tail, 1.0 - tail])
    return float(low), float(high)


def area_under_curve(consumed, returns) -> float:
    """Trapezoidal integral of mean return over consumed trajectories."""
    return float(np.trapezoid(np.asarray(returns, dtype=float), np.asarray(consumed, dtype=float)))
