"""Run configuration read from ``key = value`` sections.

Sections: ``[ppo]`` (optimizer and auxiliary scales), ``[env]`` (terrain
schedule, randomization toggles), ``[encoder]`` (network widths) and
``[run]`` (iterations, checkpoint cadence).
"""
from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field

from ..encoders.networks import EncoderConfig
from ..terrainsim.env import EnvConfig


class ConfigError(ValueError):
    pass


@dataclass
class PPOConfig:
    clip: float = 0.2
    gamma: float = 0.99
    lam: float = 0.95
    epochs: int = 5
    minibatches: int = 4
    entropy_coef: float = 0.005
    learning_rate: float = 3e-4
    value_coef: float = 0.5
    max_grad_norm: float = 1.0
    n_envs: int = 256
    steps: int = 24
    init_std: float = 1.0
    reward_scale: float = 0.02
    actor_hidden: tuple = (256, 128)
    critic_hidden: tuple = (256, 128)
    # auxiliary objective scales
    versatility_scale: float = 0.1
    encoder_kl_scale: float = 0.1
    velocity_tracking_scale: float = 1.0
    estimation_scale: float = 1.0
    vae_proprio_scale: float = 1.0
    vae_extero_scale: float = 1.0
    contrastive_scale: float = 1.0
    beta_init: float = 5.0
    returns_window: int = 100

    def validate(self) -> None:
        if not 0.0 < self.gamma < 1.0:
            raise ConfigError(f"ppo.gamma must be in (0, 1), got {self.gamma}")
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError(f"ppo.lam must be in [0, 1], got {self.lam}")
        if self.clip <= 0:
            raise ConfigError("ppo.clip must be positive")
        for name in ("epochs", "minibatches", "n_envs", "steps"):
            if getattr(self, name) < 1:
                raise ConfigError(f"ppo.{name} must be >= 1")
        if self.n_envs * self.steps < self.minibatches:
            raise ConfigError("ppo.minibatches exceeds the number of samples per iteration")
        if self.init_std <= 0 or self.learning_rate <= 0:
            raise ConfigError("ppo.init_std and ppo.learning_rate must be positive")
        if self.versatility_scale < 0 or self.encoder_kl_scale < 0:
            raise ConfigError("auxiliary scales must be non-negative")


@dataclass
class RunConfig:
    iterations: int = 300
    checkpoint_every: int = 50

    def validate(self) -> None:
        if self.iterations < 0 or self.checkpoint_every < 1:
            raise ConfigError("run.iterations must be >= 0 and run.checkpoint_every >= 1")


@dataclass
class TrainConfig:
    ppo: PPOConfig = field(default_factory=PPOConfig)
    env: EnvConfig = field(default_factory=EnvConfig)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    run: RunConfig = field(default_factory=RunConfig)

    def validate(self) -> "TrainConfig":
        self.ppo.validate()
        self.run.validate()
        self.env.n_envs = self.ppo.n_envs
        self.env.velocity_tracking_scale = self.ppo.velocity_tracking_scale
        from ..terrainsim.terrain import KINDS, N_LEVELS
        bad = [k for k in self.env.kinds if k not in KINDS]
        if bad or not self.env.kinds:
            raise ConfigError(f"env.kinds must be a non-empty subset of {KINDS}, got {self.env.kinds}")
        if not 0 <= self.env.init_level_max < N_LEVELS:
            raise ConfigError(f"env.init_level_max must be in [0, {N_LEVELS - 1}]")
        if self.env.n_points < 1:
            raise ConfigError("env.n_points must be >= 1")
        return self


def _coerce(value: str, default, key: str):
    try:
        if isinstance(default, bool):
            low = value.strip().lower()
            if low not in ("true", "false", "1", "0", "yes", "no", "on", "off"):
                raise ValueError(value)
            return low in ("true", "1", "yes", "on")
        if isinstance(default, int):
            return int(value)
        if isinstance(default, float):
            return float(value)
        if isinstance(default, tuple):
            items = [v.strip() for v in value.split(",") if v.strip()]
            if default and isinstance(default[0], int):
                return tuple(int(v) for v in items)
            return tuple(items)
        return value.strip()
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {value!r} as {type(default).__name__}") from None


def _fill(obj, section: configparser.SectionProxy, name: str) -> None:
    known = {f.name: f for f in dataclasses.fields(obj)}
    for key, raw in section.items():
        if key not in known:
            raise ConfigError(f"[{name}] unknown key {key!r}; valid keys: {', '.join(sorted(known))}")
        setattr(obj, key, _coerce(raw, getattr(obj, key), f"{name}.{key}"))


def parse_config(text: str) -> TrainConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    cfg = TrainConfig()
    sections = {"ppo": cfg.ppo, "env": cfg.env, "encoder": cfg.encoder, "run": cfg.run}
    for name in cp.sections():
        if name not in sections:
            raise ConfigError(f"unknown section [{name}]; valid: {', '.join(sections)}")
        _fill(sections[name], cp[name], name)
    return cfg.validate()


def load_config(path) -> TrainConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


def dump_config(cfg: TrainConfig) -> str:
    lines = []
    for name, obj in (("ppo", cfg.ppo), ("env", cfg.env), ("encoder", cfg.encoder), ("run", cfg.run)):
        lines.append(f"[{name}]")
        for f in dataclasses.fields(obj):
            v = getattr(obj, f.name)
            if isinstance(v, tuple):
                v = ", ".join(str(x) for x in v)
            lines.append(f"{f.name} = {v}")
        lines.append("")
    return "\n".join(lines)
