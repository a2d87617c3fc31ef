"""Pipeline configuration: one TOML file, overridden by command-line flags."""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError, MissingInputError


@dataclass
class PipelineConfig:
    duration_cap_s: int = 600
    k_per_group: int = 3
    vote_threshold: int = 3
    min_assignment_duration_s: int = 10
    significance_alpha: float = 0.01
    rng_seed: int = 7
    music_agg: str = "mean"
    paths: dict[str, str] = field(default_factory=dict)

    def validate(self) -> None:
        for name in (
            "duration_cap_s",
            "k_per_group",
            "vote_threshold",
            "min_assignment_duration_s",
            "rng_seed",
        ):
            value = getattr(self, name)
            if not isinstance(value, int) or value <= 0:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if not 0.0 < self.significance_alpha < 1.0:
            raise ConfigError(
                f"significance_alpha must be in (0, 1), got {self.significance_alpha!r}"
            )
        if self.music_agg not in ("mean", "max"):
            raise ConfigError(
                f"music_agg must be 'mean' or 'max', got {self.music_agg!r}"
            )


def load_config(path: str | Path | None) -> PipelineConfig:
    """Load a config file; a missing path argument yields the defaults."""
    config = PipelineConfig()
    if path is None:
        config.validate()
        return config
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"no such config file: {path}")
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: invalid TOML ({exc})") from None
    known = {f.name for f in fields(PipelineConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"{path}: unknown config keys {unknown}")
    for key, value in raw.items():
        if key == "paths":
            if not isinstance(value, dict):
                raise ConfigError(f"{path}: paths must be a table")
            config.paths = {str(k): str(v) for k, v in value.items()}
        else:
            setattr(config, key, value)
    config.validate()
    return config
