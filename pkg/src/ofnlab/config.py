"""Run configuration: TOML files with [agent], [experiment], [priming] sections.

Parsing uses tomli; serialization is a small writer restricted to the flat
scalar layout these configs use, chosen so that parse(serialize(cfg)) == cfg
holds exactly (floats are emitted with repr, which round-trips bitwise).
"""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, field, fields
from pathlib import Path

try:
    import tomllib  # py >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .agent import AgentConfig
from .errors import ConfigError

MODES = ("train", "prime")


@dataclass
class PrimingConfig:
    n_random_samples: int = 500
    n_prime_updates: int = 10000


@dataclass
class ExperimentConfig:
    mode: str = "train"
    env_name: str = "pendulum"
    total_env_steps: int = 30000
    eval_interval: int = 1000
    eval_episodes: int = 10
    snapshot_interval: int = 250
    seed: int = 0
    out_dir: str = "runs/run0"
    name: str = ""  # optional label; falls back to a config hash

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.total_env_steps < 0:
            raise ConfigError("total_env_steps must be >= 0")
        if self.eval_interval <= 0 or self.snapshot_interval <= 0:
            raise ConfigError("eval_interval and snapshot_interval must be positive")
        if self.eval_episodes <= 0:
            raise ConfigError("eval_episodes must be positive")


@dataclass
class RunConfig:
    agent: AgentConfig = field(default_factory=AgentConfig)
    experiment: ExperimentConfig = field(default_factory=ExperimentConfig)
    priming: PrimingConfig = field(default_factory=PrimingConfig)

    def validate(self) -> None:
        self.agent.validate()
        self.experiment.validate()

    def config_id(self) -> str:
        """Stable identity of the configuration cell, independent of seed/out_dir."""
        if self.experiment.name:
            return self.experiment.name
        skip = {"seed", "out_dir", "name"}
        parts = []
        for section, obj in (("agent", self.agent), ("experiment", self.experiment),
                             ("priming", self.priming)):
            for f in fields(obj):
                if section == "experiment" and f.name in skip:
                    continue
                parts.append(f"{section}.{f.name}={getattr(obj, f.name)!r}")
        digest = hashlib.sha256(";".join(parts).encode()).hexdigest()
        return f"cfg-{digest[:12]}"


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_format_value(v) for v in value) + "]"
    raise ConfigError(f"cannot serialize config value {value!r}")


def serialize_config(cfg: RunConfig) -> str:
    lines = ["# ofnlab run configuration"]
    for section, obj in (("agent", cfg.agent), ("experiment", cfg.experiment),
                         ("priming", cfg.priming)):
        lines.append("")
        lines.append(f"[{section}]")
        for f in fields(obj):
            value = getattr(obj, f.name)
            if value is None:
                continue  # optional keys are simply absent
            lines.append(f"{f.name} = {_format_value(value)}")
    return "\n".join(lines) + "\n"


def _build_section(cls, data: dict, section: str):
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"unknown key {key!r} in [{section}]")
        if isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    return cls(**kwargs)


def parse_config(text: str) -> RunConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(f"config is not valid TOML: {err}") from err
    for section in data:
        if section not in ("agent", "experiment", "priming"):
            raise ConfigError(f"unknown config section [{section}]")
    cfg = RunConfig(
        agent=_build_section(AgentConfig, data.get("agent", {}), "agent"),
        experiment=_build_section(ExperimentConfig, data.get("experiment", {}),
                                  "experiment"),
        priming=_build_section(PrimingConfig, data.get("priming", {}), "priming"),
    )
    cfg.validate()
    return cfg


def load_config(path) -> RunConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def save_config(cfg: RunConfig, path) -> None:
    Path(path).write_text(serialize_config(cfg), encoding="utf-8")


def override(cfg: RunConfig, seed: int | None = None,
             out_dir: str | None = None) -> RunConfig:
    """Copy with CLI-level seed/out overrides applied."""
    new = dataclasses.replace(cfg, experiment=dataclasses.replace(cfg.experiment))
    if seed is not None:
        new.experiment.seed = seed
    if out_dir is not None:
        new.experiment.out_dir = str(out_dir)
    return new
