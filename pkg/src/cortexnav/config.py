"""Run configuration: every tunable knob of the agent lives here."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Mapping

import yaml


class ConfigError(ValueError):
    """Raised when a configuration document is malformed or out of range."""


_UNIT_INTERVAL = ("lpm_threshold", "sim_threshold", "confidence_floor", "world_model_noise")
_POSITIVE = (
    "n_candidates",
    "imagination_horizon",
    "srm_window",
    "lpm_horizon",
    "min_support",
    "max_episodes_per_goal",
    "max_steps",
)


@dataclass(frozen=True)
class CortexConfig:
    n_candidates: int = 3
    imagination_horizon: int = 4
    srm_window: int = 5
    lpm_horizon: int = 6
    lpm_threshold: float = 0.8
    sim_threshold: float = 0.85
    confidence_floor: float = 0.7
    min_support: int = 2
    max_episodes_per_goal: int = 3
    max_steps: int = 100
    world_model_noise: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        for name in _POSITIVE:
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"{name} must be an integer, got {value!r}")
            if value < 1:
                raise ConfigError(f"{name} must be >= 1, got {value}")
        for name in _UNIT_INTERVAL:
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{name} must be a real number, got {value!r}")
            if not 0.0 <= float(value) <= 1.0:
                raise ConfigError(f"{name} out of [0,1]: {value}")
            object.__setattr__(self, name, float(value))
        if isinstance(self.seed, bool) or not isinstance(self.seed, int):
            raise ConfigError(f"seed must be an integer, got {self.seed!r}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed out of 64-bit unsigned range: {self.seed}")
        if self.srm_window > self.max_steps:
            raise ConfigError(
                f"srm_window ({self.srm_window}) exceeds max_steps ({self.max_steps})"
            )

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def replace(self, **changes: Any) -> "CortexConfig":
        return config_from_mapping({**self.to_dict(), **changes})


FIELD_NAMES = tuple(f.name for f in fields(CortexConfig))


def config_from_mapping(data: Mapping[str, Any]) -> CortexConfig:
    unknown = sorted(set(data) - set(FIELD_NAMES))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    return CortexConfig(**dict(data))


def load_config(source: str | Path | Mapping[str, Any] | None = None) -> CortexConfig:
    """Load a config from YAML text, a YAML file path, or a mapping.

    Absent keys take their defaults. Unknown keys and out-of-range values are
    errors; nothing is clamped.
    """
    if source is None:
        return CortexConfig()
    if isinstance(source, Mapping):
        return config_from_mapping(source)
    if isinstance(source, Path):
        source = source.read_text()
    try:
        data = yaml.safe_load(source)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config does not parse: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, Mapping):
        raise ConfigError("config document must be a mapping")
    return config_from_mapping(data)


def dump_config(config: CortexConfig) -> str:
    return yaml.safe_dump(config.to_dict(), sort_keys=False)
