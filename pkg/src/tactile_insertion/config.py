"""Run configuration: one INI section per module, every constant a key.

A missing file section or key keeps the default below. Unknown sections or
keys are rejected so typos fail loudly. ``TACTILE_INSERTION_CONFIG`` names a
config file used when no explicit path is given.
"""
from __future__ import annotations

import configparser
import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path

CONFIG_ENV_VAR = "TACTILE_INSERTION_CONFIG"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GeometryParams:
    clearance: float = 3.0
    n_samples: int = 256
    cluster_radius: float = 2.0
    rotation_weight: float = 0.5


@dataclass(frozen=True)
class SensorParams:
    kappa1: float = 0.02
    kappa2: float = 0.02
    kappa3: float = 0.01
    kappa4: float = 0.012
    sigma: float = 0.05
    frames: int = 12
    wrench_frames: int = 32
    force_gain: float = 0.1
    torque_gain: float = 0.01
    lateral_force_ratio: float = 1.0
    texture_amplitude: float = 0.3
    fingerprint_scale: float = 1.0
    rgb_noise: float = 0.0
    chamfer_gain: float = 0.7
    chamfer_clearance_reduction: float = 0.5


@dataclass(frozen=True)
class SimParams:
    penalty: float = 1.0
    success_reward: float = 10.0
    max_attempts: int = 15
    max_step_xy: float = 4.0
    max_step_theta: float = 4.0
    emax_xy: float = 12.0
    emax_theta: float = 15.0
    train_xy: float = 6.0
    train_theta: float = 10.0
    eval_xy: float = 5.0
    eval_theta: float = 10.0
    regrasp_every: int = 10
    regrasp_offset: float = 0.5


@dataclass(frozen=True)
class AgentParams:
    gamma: float = 0.99
    tau: float = 0.005
    policy_delay: int = 2
    target_noise: float = 0.2
    target_noise_clip: float = 0.5
    exploration_noise: float = 0.4
    batch_size: int = 64
    lr_actor: float = 3e-4
    lr_critic: float = 1e-3
    buffer_capacity: int = 100_000
    freeze_episodes: int = 50
    actor_hidden: int = 128
    critic_hidden: int = 64
    wrench_actor_hidden: int = 64
    bootstrap_n: int = 300
    bootstrap_epochs: int = 200
    bootstrap_mse: float = 0.5
    bootstrap_lr: float = 1e-3
    bootstrap_batch: int = 32
    sl_epochs: int = 300
    sl_lr: float = 1e-3
    sl_batch: int = 64


@dataclass(frozen=True)
class CurriculumParams:
    window: int = 30
    theta_r_fraction: float = 0.6
    theta_s_fraction: float = 0.4
    line_episodes: int = 100
    corner_episodes: int = 25
    u_episodes: int = 150
    hole_episodes: int = 300
    transition_cap: int = 3000
    fresh_buffer: bool = True


@dataclass(frozen=True)
class EvalParams:
    trials: int = 250
    seed: int = 0


@dataclass(frozen=True)
class ObjectParams:
    """Object footprints as ``"<kind> <dimensions...>"`` strings (mm)."""

    cylinder: str = "circle 17.5"
    hexagon: str = "hexagon 18"
    ellipse: str = "ellipse 21 13"
    cuboid: str = "rectangle 50 25"
    phone_charger: str = "rounded_rectangle 46 24 5"
    small_bottle: str = "circle 14"
    big_bottle: str = "circle 20"
    paper_box: str = "rectangle 55 30"


@dataclass(frozen=True)
class Config:
    geometry: GeometryParams = field(default_factory=GeometryParams)
    sensors: SensorParams = field(default_factory=SensorParams)
    sim: SimParams = field(default_factory=SimParams)
    agent: AgentParams = field(default_factory=AgentParams)
    curriculum: CurriculumParams = field(default_factory=CurriculumParams)
    eval: EvalParams = field(default_factory=EvalParams)
    objects: ObjectParams = field(default_factory=ObjectParams)

    def to_ini(self) -> str:
        lines = []
        for sec in dataclasses.fields(self):
            lines.append(f"[{sec.name}]")
            for f in dataclasses.fields(getattr(self, sec.name)):
                value = getattr(getattr(self, sec.name), f.name)
                lines.append(f"{f.name} = {value if isinstance(value, str) else repr(value)}")
            lines.append("")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "Config":
        kw = {}
        for sec in dataclasses.fields(cls):
            kw[sec.name] = sec.default_factory()  # type: ignore[misc]
            if sec.name in d:
                kw[sec.name] = dataclasses.replace(kw[sec.name], **d[sec.name])
        return cls(**kw)


def _coerce(value: str, typ, key: str):
    try:
        if typ in (bool, "bool"):
            low = value.strip().lower()
            if low not in ("true", "false"):
                raise ValueError(value)
            return low == "true"
        if typ in (int, "int"):
            return int(value)
        if typ in (float, "float"):
            return float(value)
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {value!r}") from exc
    return value


def parse_config(text: str) -> Config:
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    sections = {f.name: f for f in dataclasses.fields(Config)}
    kw = {}
    for name in parser.sections():
        if name not in sections:
            raise ConfigError(f"unknown config section [{name}]")
        base = sections[name].default_factory()  # type: ignore[misc]
        types = {f.name: f.type for f in dataclasses.fields(base)}
        updates = {}
        for key, value in parser.items(name):
            if key not in types:
                raise ConfigError(f"unknown key {name}.{key}")
            updates[key] = _coerce(value, types[key], f"{name}.{key}")
        kw[name] = dataclasses.replace(base, **updates)
    return Config(**kw)


def load_config(path: str | os.PathLike | None = None) -> Config:
    """Load ``path``, else the file named by the environment variable, else defaults."""
    if path is None:
        path = os.environ.get(CONFIG_ENV_VAR) or None
    if path is None:
        return Config()
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    return parse_config(p.read_text())
