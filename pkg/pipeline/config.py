"""
Configuration loading - flat dotted-key YAML documents

Both the run configuration and the synthetic-catalogue spec are written as a
flat mapping such as ``stats.n_resamples: 2000``. Nested mappings are also
accepted and merged.
"""

import logging
from pathlib import Path
from typing import Any, Dict, Optional, Type, TypeVar, Union

import yaml
from pydantic import BaseModel, ValidationError

from uemr_core.synth import SynthSpec

from .models import RunConfig

logger = logging.getLogger(__name__)

ModelT = TypeVar("ModelT", bound=BaseModel)


class ConfigError(ValueError):
    """The configuration document cannot be read or validated."""


def unflatten(flat: Dict[str, Any]) -> Dict[str, Any]:
    """
    Expand dotted keys into nested dictionaries.

    Args:
        flat: mapping whose keys may contain dots

    Returns:
        Nested mapping; a key that is both a leaf and a prefix is an error.
    """
    nested: Dict[str, Any] = {}
    for key, value in flat.items():
        parts = str(key).split(".")
        node = nested
        for part in parts[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigError(f"Key '{key}' conflicts with scalar '{part}'")
            node = child
        leaf = parts[-1]
        if isinstance(value, dict):
            existing = node.setdefault(leaf, {})
            if not isinstance(existing, dict):
                raise ConfigError(f"Key '{key}' conflicts with an existing scalar")
            existing.update(unflatten(value))
        else:
            if isinstance(node.get(leaf), dict):
                raise ConfigError(f"Key '{key}' conflicts with nested keys")
            node[leaf] = value
    return nested


def flatten(nested: Dict[str, Any], prefix: str = "") -> Dict[str, Any]:
    """Inverse of unflatten; lists and scalars stay as values."""
    flat: Dict[str, Any] = {}
    for key, value in nested.items():
        name = f"{prefix}.{key}" if prefix else str(key)
        if isinstance(value, dict) and value and all(isinstance(k, str) for k in value):
            flat.update(flatten(value, name))
        else:
            flat[name] = value
    return flat


def _read_mapping(path: Union[str, Path]) -> Dict[str, Any]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"Cannot parse {path}: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must contain a mapping")
    return data


def _validate(model: Type[ModelT], data: Dict[str, Any], source: str) -> ModelT:
    try:
        return model.model_validate(unflatten(data))
    except ValidationError as exc:
        raise ConfigError(f"Invalid {source}: {exc}") from exc


def load_config(path: Optional[Union[str, Path]] = None) -> RunConfig:
    """Load a RunConfig; no path gives the defaults."""
    if path is None:
        return RunConfig()
    config = _validate(RunConfig, _read_mapping(path), str(path))
    logger.info(f"Loaded configuration from {path}")
    return config


def load_synth_spec(path: Union[str, Path]) -> SynthSpec:
    return _validate(SynthSpec, _read_mapping(path), str(path))


def dump_flat_yaml(model: BaseModel) -> str:
    """Serialise a model as the flat dotted-key YAML it can be loaded from."""
    flat = flatten(model.model_dump(mode="json", exclude_none=True))
    return yaml.safe_dump(flat, sort_keys=True, default_flow_style=None)
