"""Run configuration documents (TOML or JSON, flat keys)."""
from __future__ import annotations

import json
import sys
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .stepper import RunConfig

__all__ = ["ConfigError", "load_mapping", "load_config"]


class ConfigError(ValueError):
    pass


def load_mapping(path) -> dict:
    """Parse a flat config document.  A top-level ``[run]`` table is flattened."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config not found: {path}")
    text = path.read_text()
    try:
        if path.suffix.lower() == ".json":
            data = json.loads(text)
        else:
            data = tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse {path.name}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config document must be a table/object")
    flat = {}
    for k, v in data.items():
        if isinstance(v, dict):
            flat.update(v)
        else:
            flat[k] = v
    return flat


def load_config(path) -> RunConfig:
    try:
        return RunConfig.from_mapping(load_mapping(path))
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad config: {exc}") from None
