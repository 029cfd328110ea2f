"""Seeded experiment runs: training, evaluation checkpoints, and persistence."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import __version__
from ..envs import discounted_returns, sample_batch
from ..history import IterateHistory
from ..rng import EVAL, INIT, STATS, Streams
from ..sg import SgConfig, run_sg
from ..svrpg import run as run_svrpg
from .config import ExperimentConfig
from .stats import bootstrap_ci

log = logging.getLogger(__name__)

SEED_COLUMNS = ["trajectories_consumed", "epoch", "sub_iter", "mean_return",
                "iw_var", "fg_rate", "si_rate", "wall_ms"]
AGGREGATE_COLUMNS = ["trajectories_consumed", "epoch", "sub_iter", "mean_return", "ci_low", "ci_high",
                     "iw_var", "fg_rate", "si_rate", "wall_ms"]


@dataclass
class LearningCurvePoint:
    trajectories_consumed: int
    mean_return: float
    epoch: int | None = None
    sub_iter: int | None = None
    iw_var: float | None = None
    fg_rate: float | None = None
    si_rate: float | None = None
    wall_ms: float | None = None


def evaluate_policy(env, policy, params, n_eval: int, rng: Streams) -> float:
    """Mean discounted return of ``n_eval`` stochastic rollouts."""
    if n_eval < 1:
        raise ValueError("n_eval must be >= 1")
    return float(discounted_returns(sample_batch(env, policy, params, n_eval, rng), env.discount).mean())


def theta_hash(theta) -> str:
    return hashlib.sha256(np.ascontiguousarray(theta, dtype="<f8").tobytes()).hexdigest()


def initial_params(policy, seed: int) -> np.ndarray:
    """Initialization drawn from the seed alone, so every algorithm shares it."""
    return policy.init_params(Streams(seed).child(INIT).generator())


def checkpoints(budget: int, cadence: int) -> list[int]:
    return list(range(0, budget + 1, cadence))


def learning_curve(env, policy, history: IterateHistory, cadence: int, episodes: int,
                   streams: Streams) -> list[LearningCurvePoint]:
    """Evaluate the latest iterate at each checkpoint, skipping repeats.

    The final iterate is always included. Evaluation streams are keyed by the
    consumed count and are disjoint from training streams.
    """
    points: list[LearningCurvePoint] = []
    seen = set()
    grid = checkpoints(history.budget, cadence)
    if history.records:
        grid.append(history.records[-1].consumed)
    for c in grid:
        theta, rec = history.theta_after(c)
        key = None if rec is None else id(rec)
        if key in seen:
            continue
        seen.add(key)
        consumed = 0 if rec is None else rec.consumed
        ret = evaluate_policy(env, policy, theta, episodes, streams.child(EVAL, consumed))
        if rec is None:
            points.append(LearningCurvePoint(0, ret))
        else:
            points.append(LearningCurvePoint(consumed, ret, rec.epoch, rec.sub_iter, rec.iw_var,
                                             rec.fg_rate, rec.si_rate, rec.wall_ms))
    points.sort(key=lambda p: p.trajectories_consumed)
    return points


def train(config: ExperimentConfig, env, policy, seed: int) -> IterateHistory:
    theta0 = initial_params(policy, seed)
    algo = config.algorithm_config()
    streams = Streams(seed)
    if isinstance(algo, SgConfig):
        return run_sg(env, policy, theta0, algo, streams)
    return run_svrpg(env, policy, theta0, algo, streams)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path: Path, columns: list[str], rows: list[dict]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row.get(c)) for c in columns])
    path.write_text(buf.getvalue(), encoding="utf-8", newline="")


def read_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def aggregate(curves: dict[int, list[LearningCurvePoint]], budget: int, cadence: int,
              level: float = 0.90, resamples: int = 2000) -> list[dict]:
    """Mean over seeds with bootstrap band at each checkpoint.

    A seed contributes its latest point not exceeding the checkpoint.
    """
    grid = checkpoints(budget, cadence)
    rows = []
    for j, c in enumerate(grid):
        picked = []
        for seed in sorted(curves):
            prior = [p for p in curves[seed] if p.trajectories_consumed <= c]
            if prior:
                picked.append(prior[-1])
        if not picked:
            continue
        returns = np.array([p.mean_return for p in picked])
        low, high = bootstrap_ci(returns, level, resamples, Streams(0, (STATS, j)).generator())
        row = {"trajectories_consumed": c, "mean_return": float(returns.mean()),
               "ci_low": low, "ci_high": high}
        for name in ("iw_var", "fg_rate", "si_rate"):
            vals = [getattr(p, name) for p in picked if getattr(p, name) is not None]
            row[name] = float(np.mean(vals)) if vals else None
        rows.append(row)
    return rows


def run_experiment(config: ExperimentConfig) -> Path:
    """Train and evaluate every seed; write per-seed CSVs, aggregate CSV, manifest."""
    start = time.perf_counter()
    out = config.run_dir()
    out.mkdir(parents=True, exist_ok=True)
    env = config.build_env()
    policy = config.build_policy(env)
    curves = {}
    per_seed = {}
    for seed in config.seeds:
        history = train(config, env, policy, seed)
        points = learning_curve(env, policy, history, config.eval_cadence, config.eval_episodes,
                                Streams(seed))
        curves[seed] = points
        write_csv(out / f"seed_{seed}.csv", SEED_COLUMNS, [vars(p) for p in points])
        per_seed[str(seed)] = {
            "theta0_sha256": theta_hash(history.theta0),
            "trajectories_consumed": history.consumed,
            "updates": len(history),
            "epochs": len({r.epoch for r in history.records}),
            "degenerate_weights": history.degenerate_weights,
            "omega_fallbacks": history.omega_fallbacks,
            "initial_return": points[0].mean_return,
            "final_return": points[-1].mean_return,
        }
        log.info("seed %d: %d updates, final return %.3f", seed, len(history), points[-1].mean_return)
    write_csv(out / "aggregate.csv", AGGREGATE_COLUMNS,
              aggregate(curves, config.budget, config.eval_cadence))
    manifest = {
        "version": f"svrpg_lab {__version__}",
        "algorithm": config.algorithm,
        "config": config.to_flat(),
        "seeds": list(config.seeds),
        "per_seed": per_seed,
        "degenerate_weights": sum(v["degenerate_weights"] for v in per_seed.values()),
        "omega_fallbacks": sum(v["omega_fallbacks"] for v in per_seed.values()),
        "runtime_s": time.perf_counter() - start,
    }
    write_manifest(out / "manifest.json", manifest)
    return out


def write_manifest(path: Path, manifest: dict) -> None:
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
                    encoding="utf-8", newline="")


def read_manifest(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def config_from_manifest(path) -> ExperimentConfig:
    return ExperimentConfig.from_flat(read_manifest(path)["config"])
