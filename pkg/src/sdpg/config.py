"""Training configuration and its TOML file format.

A config file has top-level ``algorithm`` and ``seed`` keys and up to three
tables::

    algorithm = "sdpg"          # or "d4pg"
    seed = 0

    [env]
    name = "pendulum"           # "pendulum" | "chain" | "bandit"
    # remaining keys are passed to the environment constructor

    [agent]                     # TrainConfig fields describing the networks
    [train]                     # TrainConfig fields describing the loop

Unknown keys are errors. ``resolved_toml`` writes every field back out, and
loading that text reproduces the same ``TrainConfig``.
"""
from __future__ import annotations

import dataclasses
import json
import re
from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


class ConfigError(ValueError):
    pass


AGENT_KEYS = ("hidden", "alpha", "beta", "optimizer", "n_samples", "zeta", "gamma", "noise_dim",
              "n_atoms", "v_min", "v_max", "dtype", "batch_norm")
TRAIN_KEYS = ("batch_size", "delta", "replay_capacity", "warmup", "target_mode", "tau",
              "hard_every", "updates_per_step", "train_actor", "max_env_steps", "max_episodes",
              "eval_every", "eval_episodes", "stop_return", "log_every", "checkpoint_every",
              "threads")


@dataclass
class TrainConfig:
    algorithm: str = "sdpg"
    seed: int = 0
    env_name: str = "pendulum"
    env_params: dict = field(default_factory=dict)
    # networks and optimisation
    hidden: tuple = (64, 64)
    alpha: float = 1e-4          # actor learning rate
    beta: float = 1e-4           # critic learning rate
    optimizer: str = "adam"
    n_samples: int = 51
    zeta: float = 1.0
    gamma: float = 0.99
    noise_dim: int = 1
    n_atoms: int = 51
    v_min: float = -1700.0
    v_max: float = 0.0
    dtype: str = "float32"
    batch_norm: bool = False     # reserved; normalisation layers are not implemented
    # loop
    batch_size: int = 256
    delta: float = 0.3
    replay_capacity: int = 200_000
    warmup: int | None = None    # None means 10 * batch_size
    target_mode: str = "soft"    # "soft" | "hard"
    tau: float = 0.005
    hard_every: int = 1
    updates_per_step: int = 1
    train_actor: bool = True
    max_env_steps: int = 200_000
    max_episodes: int = 0        # 0 = unlimited
    eval_every: int = 5000
    eval_episodes: int = 100
    stop_return: float | None = None
    log_every: int = 1000
    checkpoint_every: int = 0
    threads: int = 1

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        self.validate()

    @property
    def warmup_steps(self) -> int:
        return 10 * self.batch_size if self.warmup is None else int(self.warmup)

    def validate(self):
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)
        need(self.algorithm in ("sdpg", "d4pg"), f"algorithm must be sdpg or d4pg, got {self.algorithm!r}")
        need(self.env_name in ("pendulum", "chain", "bandit"), f"unknown env {self.env_name!r}")
        need(self.alpha > 0 and self.beta > 0, "learning rates must be positive")
        need(self.optimizer in ("sgd", "adam"), f"optimizer must be sgd or adam, got {self.optimizer!r}")
        need(self.n_samples >= 1, "n_samples must be >= 1")
        need(self.zeta > 0, "zeta must be positive")
        need(0 <= self.gamma < 1, "gamma must lie in [0, 1)")
        need(self.noise_dim >= 1, "noise_dim must be >= 1")
        need(self.n_atoms >= 2 and self.v_min < self.v_max, "need n_atoms >= 2 and v_min < v_max")
        need(self.dtype in ("float32", "float64"), "dtype must be float32 or float64")
        need(not self.batch_norm, "batch_norm is not implemented; set batch_norm = false")
        need(self.batch_size >= 1, "batch_size must be >= 1")
        need(self.delta >= 0, "delta must be nonnegative")
        need(self.replay_capacity >= 1, "replay_capacity must be >= 1")
        need(self.target_mode in ("soft", "hard"), "target_mode must be soft or hard")
        need(0 < self.tau <= 1, "tau must lie in (0, 1]")
        need(self.hard_every >= 1 and self.updates_per_step >= 0, "bad update schedule")
        need(self.max_env_steps >= 0 and self.max_episodes >= 0, "step/episode limits must be >= 0")
        need(self.eval_every >= 0 and self.eval_episodes >= 1, "bad evaluation schedule")
        need(self.threads in (1, 2), "threads must be 1 or 2")
        need(len(self.hidden) >= 1 and min(self.hidden) >= 1, "hidden sizes must be positive")

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["hidden"] = list(self.hidden)
        return d


def _line_of(text: str, key: str) -> int | None:
    pat = re.compile(rf"^\s*{re.escape(key)}\s*=")
    for i, line in enumerate(text.splitlines(), 1):
        if pat.match(line):
            return i
    return None


def parse_config(text: str, source="<config>") -> TrainConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: {exc}") from None

    def unknown(key, where):
        line = _line_of(text, key)
        at = f" (line {line})" if line else ""
        return ConfigError(f"{source}{at}: unknown key {key!r} in {where}")

    kwargs: dict = {}
    for key, value in raw.items():
        if key in ("algorithm", "seed"):
            kwargs[key] = value
        elif key == "env":
            if not isinstance(value, dict):
                raise ConfigError(f"{source}: [env] must be a table")
            env = dict(value)
            if "name" in env:
                kwargs["env_name"] = env.pop("name")
            kwargs["env_params"] = env
        elif key in ("agent", "train"):
            allowed = AGENT_KEYS if key == "agent" else TRAIN_KEYS
            if not isinstance(value, dict):
                raise ConfigError(f"{source}: [{key}] must be a table")
            for k, v in value.items():
                if k not in allowed:
                    raise unknown(k, f"[{key}]")
                kwargs[k] = v
        else:
            raise unknown(key, "top level")
    try:
        cfg = TrainConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    from .envs import make_env
    try:
        make_env(cfg.env_name, **cfg.env_params)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{source}: bad [env] parameters: {exc}") from None
    return cfg


def load_config(path) -> TrainConfig:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_config(text, str(path))


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    if isinstance(v, float):
        return repr(v) if v == v and abs(v) != float("inf") else ("nan" if v != v else ("inf" if v > 0 else "-inf"))
    if isinstance(v, str):
        return json.dumps(v)
    return str(v)


def resolved_toml(cfg: TrainConfig) -> str:
    """Every field spelled out. ``None`` values are omitted (TOML has no null)."""
    d = cfg.to_dict()
    lines = [f"algorithm = {_toml_value(d['algorithm'])}", f"seed = {d['seed']}", "", "[env]",
             f"name = {_toml_value(d['env_name'])}"]
    for k, v in sorted(d["env_params"].items()):
        lines.append(f"{k} = {_toml_value(v)}")
    for section, keys in (("agent", AGENT_KEYS), ("train", TRAIN_KEYS)):
        lines += ["", f"[{section}]"]
        for k in keys:
            if d[k] is not None:
                lines.append(f"{k} = {_toml_value(d[k])}")
    return "\n".join(lines) + "\n"
