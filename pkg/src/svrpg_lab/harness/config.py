"""Experiment configuration: a flat ``key = value`` text format.

Every key has a default and may be overridden on the command line with
``--key value``. Unknown keys are errors. Environment overrides use the
``env.<name>`` prefix and are checked against the environment's schema.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, fields
from pathlib import Path

from ..envs import OVERRIDE_SCHEMA, Environment, make_env
from ..errors import ConfigError
from ..policy import GaussianPolicy
from ..sg import SgConfig
from ..svrpg import CORRECTIONS, SvrpgConfig

OUTPUT_ENV_VAR = "SVRPG_LAB_OUTPUT"


def _bool(text: str) -> bool:
    low = str(text).strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _int(text) -> int:
    value = float(text)
    if not math.isfinite(value) or value != int(value):
        raise ValueError(f"expected an integer, got {text!r}")
    return int(value)


def _float(text) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(f"expected a finite number, got {text!r}")
    return value


def _int_list(text) -> tuple[int, ...]:
    if isinstance(text, (list, tuple)):
        return tuple(_int(v) for v in text)
    items = [v.strip() for v in str(text).split(",") if v.strip()]
    return tuple(_int(v) for v in items)


def _choice(*options):
    def parse(text):
        text = str(text).strip()
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {text!r}")
        return text
    return parse


def _opt_float(text):
    if text is None or str(text).strip().lower() in ("", "none"):
        return None
    return _float(text)


def _str(text) -> str:
    text = str(text).strip()
    if not text:
        raise ValueError("must not be empty")
    return text


def _key(parser, default):
    return field(default=default, metadata={"parse": parser})


@dataclass(frozen=True)
class ExperimentConfig:
    """All run settings; attribute names are config keys with ``.`` replaced by ``_``."""

    name: str = _key(_str, "experiment")
    env: str = _key(_choice(*OVERRIDE_SCHEMA), "cartpole")
    policy: str = _key(_choice("mlp", "linear"), "mlp")
    policy_hidden: tuple[int, ...] = _key(_int_list, (8,))
    policy_features: str = _key(_choice("bias", "identity", "affine"), "affine")
    policy_feature_bound: float | None = _key(_opt_float, None)
    policy_std: str = _key(_choice("fixed", "learned"), "learned")
    policy_sigma: float = _key(_float, 1.0)
    algorithm: str = _key(_choice("svrpg", "sg"), "svrpg")
    budget: int = _key(_int, 10_000)
    estimator: str = _key(_choice("reinforce", "gpomdp"), "gpomdp")
    baseline: str = _key(_choice("none", "linear"), "none")
    ridge: float = _key(_float, 1e-5)
    svrpg_N: int = _key(_int, 100)
    svrpg_B: int = _key(_int, 10)
    svrpg_m_max: int = _key(_int, 50)
    svrpg_alpha: float = _key(_float, 5e-2)
    svrpg_self_normalize: bool = _key(_bool, False)
    svrpg_adaptive_epoch: bool = _key(_bool, True)
    svrpg_correction: str = _key(_choice(*CORRECTIONS), "per_step")
    sg_batch: int = _key(_int, 10)
    sg_alpha: float = _key(_float, 1e-2)
    adam_beta1: float = _key(_float, 0.9)
    adam_beta2: float = _key(_float, 0.99)
    adam_eps: float = _key(_float, 1e-8)
    seeds: tuple[int, ...] = _key(_int_list, tuple(range(10)))
    eval_cadence: int = _key(_int, 100)
    eval_episodes: int = _key(_int, 20)
    workers: int = _key(_int, 1)
    output: str = _key(_str, "runs")
    diag_samples: int = _key(_int, 1000)
    diag_perturb: float = _key(_float, 0.1)
    env_overrides: tuple[tuple[str, float], ...] = field(default=(), metadata={"parse": None})

    def __post_init__(self):
        if not self.seeds:
            raise ConfigError("seeds: at least one seed is required")
        if any(s < 0 for s in self.seeds):
            raise ConfigError("seeds: must be non-negative")
        for key, attr in (("eval.cadence", self.eval_cadence), ("eval.episodes", self.eval_episodes),
                          ("workers", self.workers), ("budget", self.budget),
                          ("diag.samples", self.diag_samples)):
            if attr < 1:
                raise ConfigError(f"{key}: must be >= 1, got {attr}")
        if self.policy_sigma <= 0:
            raise ConfigError(f"policy.sigma: must be positive, got {self.policy_sigma}")
        if not self.policy_hidden:
            raise ConfigError("policy.hidden: at least one hidden layer is required")
        # Surface algorithm and environment errors at load time.
        self.algorithm_config()
        self.build_env()

    # -- conversion

    @staticmethod
    def keys() -> list[str]:
        return [_attr_to_key(f.name) for f in fields(ExperimentConfig) if f.metadata.get("parse")]

    @classmethod
    def from_flat(cls, values: dict) -> "ExperimentConfig":
        known = {_attr_to_key(f.name): f for f in fields(cls) if f.metadata.get("parse")}
        kwargs = {}
        env_overrides = {}
        for key, raw in values.items():
            if key.startswith("env."):
                env_overrides[key[4:]] = raw
                continue
            if key not in known:
                raise ConfigError(f"{key}: unknown key")
            f = known[key]
            try:
                kwargs[f.name] = f.metadata["parse"](raw)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{key}: {exc}") from None
        env_name = kwargs.get("env", cls.env)
        schema = OVERRIDE_SCHEMA.get(env_name, ())
        parsed = []
        for k, raw in env_overrides.items():
            if k not in schema:
                raise ConfigError(f"env.{k}: not an override of {env_name!r} (allowed: {', '.join(schema)})")
            try:
                parsed.append((k, _float(raw)))
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"env.{k}: {exc}") from None
        kwargs["env_overrides"] = tuple(sorted(parsed))
        return cls(**kwargs)

    def to_flat(self) -> dict:
        """JSON-ready ``key -> value`` mapping that :meth:`from_flat` inverts."""
        out = {}
        for f in fields(self):
            if not f.metadata.get("parse"):
                continue
            value = getattr(self, f.name)
            out[_attr_to_key(f.name)] = list(value) if isinstance(value, tuple) else value
        for k, v in self.env_overrides:
            out[f"env.{k}"] = v
        return out

    # -- builders

    def build_env(self) -> Environment:
        return make_env(self.env, dict(self.env_overrides))

    def build_policy(self, env: Environment | None = None) -> GaussianPolicy:
        env = env or self.build_env()
        if self.policy == "mlp":
            return GaussianPolicy.mlp(env.state_dim, env.action_dim, self.policy_hidden,
                                      std=self.policy_std, sigma=self.policy_sigma)
        return GaussianPolicy.linear(env.state_dim, env.action_dim, self.policy_features,
                                     self.policy_feature_bound, std=self.policy_std, sigma=self.policy_sigma)

    def algorithm_config(self) -> SvrpgConfig | SgConfig:
        adam = dict(beta1=self.adam_beta1, beta2=self.adam_beta2, eps=self.adam_eps)
        common = dict(budget=self.budget, estimator=self.estimator, baseline=self.baseline,
                      ridge=self.ridge, workers=self.workers, **adam)
        try:
            if self.algorithm == "svrpg":
                return SvrpgConfig(N=self.svrpg_N, B=self.svrpg_B, m_max=self.svrpg_m_max,
                                   alpha=self.svrpg_alpha, self_normalize=self.svrpg_self_normalize,
                                   adaptive_epoch=self.svrpg_adaptive_epoch,
                                   correction=self.svrpg_correction, **common)
            return SgConfig(batch=self.sg_batch, alpha=self.sg_alpha, **common)
        except ValueError as exc:
            raise ConfigError(f"{self.algorithm}: {exc}") from None

    def run_dir(self) -> Path:
        return Path(self.output) / self.name


def _attr_to_key(name: str) -> str:
    for prefix in ("policy_", "svrpg_", "sg_", "adam_", "eval_", "diag_"):
        if name.startswith(prefix):
            return prefix[:-1] + "." + name[len(prefix):]
    return name


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Read ``key = value`` lines; ``#`` starts a comment."""
    values: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: missing key")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        values[key] = value
    return values


def parse_overrides(tokens: list[str]) -> dict[str, str]:
    """Turn ``["--svrpg.N", "50", "--seeds=0,1"]`` into a key-value map."""
    out: dict[str, str] = {}
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if not tok.startswith("--"):
            raise ConfigError(f"expected an option like --key value, got {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, value = key.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(tokens):
                raise ConfigError(f"--{key}: missing value")
            value = tokens[i + 1]
            i += 2
        out[key] = value
    return out


def load_config(path, overrides: dict[str, str] | None = None) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    values = parse_config_text(text, str(path))
    if "output" not in values and os.environ.get(OUTPUT_ENV_VAR):
        values["output"] = os.environ[OUTPUT_ENV_VAR]
    values.update(overrides or {})
    return ExperimentConfig.from_flat(values)
