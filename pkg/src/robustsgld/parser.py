from __future__ import annotations

from pathlib import Path
from typing import Any, Iterable

import numpy as np
import yaml

# Maximum size of a configuration file (1MB)
MAX_YAML_SIZE = 1024 * 1024


class ConfigError(ValueError):
    """Base exception for configuration errors."""
    pass


class ConfigFormatError(ConfigError):
    """Raised when a configuration file or override is malformed."""
    pass


class ConfigSizeError(ConfigError):
    """Raised when a configuration file is too large."""
    pass


class UnknownConfigKeyError(ConfigError):
    """Raised for keys that are not configuration fields."""

    def __init__(self, unknown: Iterable[str], valid: Iterable[str]) -> None:
        self.unknown = sorted(unknown)
        self.valid = list(valid)
        super().__init__(
            f"Unknown configuration key(s): {', '.join(self.unknown)}. "
            f"Valid keys: {', '.join(self.valid)}"
        )


def load_config_file(path: Path) -> dict[str, Any]:
    """Load a flat ``key: value`` YAML mapping.

    Args:
        path: Path to the configuration file

    Returns:
        dict: Raw configuration values

    Raises:
        FileNotFoundError: If the file doesn't exist
        ConfigSizeError: If the file is too large
        ConfigFormatError: If the YAML is invalid or not a mapping
    """
    if not path.exists():
        raise FileNotFoundError(f"Configuration file not found: {path}")
    if not path.is_file():
        raise ConfigFormatError(f"Configuration path is not a file: {path}")

    file_size = path.stat().st_size
    if file_size > MAX_YAML_SIZE:
        raise ConfigSizeError(
            f"Configuration file too large: {file_size} bytes (max {MAX_YAML_SIZE})"
        )

    try:
        raw = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigFormatError(f"Cannot read configuration file as UTF-8: {exc}") from exc

    try:
        data = yaml.safe_load(raw) or {}
    except yaml.YAMLError as exc:
        raise ConfigFormatError(f"Invalid YAML in {path}: {exc}") from exc

    if not isinstance(data, dict):
        raise ConfigFormatError(f"Configuration file must contain a YAML mapping: {path}")
    return data


def parse_value(text: str) -> Any:
    """Parse a scalar or list written in YAML flow syntax (``2.0``, ``[1, 2]``, ``true``)."""
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigFormatError(f"Cannot parse value {text!r}: {exc}") from exc


def parse_overrides(items: Iterable[str] | None) -> dict[str, Any]:
    """Turn ``key=value`` strings into a mapping; later items win."""
    overrides: dict[str, Any] = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigFormatError(f"Override must look like key=value, got {item!r}")
        key, value = item.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigFormatError(f"Override has an empty key: {item!r}")
        overrides[key] = parse_value(value.strip())
    return overrides


def read_vector(source: str) -> np.ndarray:
    """A flat vector given inline (``[1, 2, 3]`` or ``1,2,3``) or as a whitespace-separated file."""
    path = Path(source)
    if path.is_file():
        try:
            values = np.loadtxt(path, dtype=float, ndmin=1)
        except ValueError as exc:
            raise ConfigFormatError(f"Cannot read a vector from {path}: {exc}") from exc
        return values.reshape(-1)

    text = source.strip()
    if not text.startswith("["):
        text = f"[{text}]"
    parsed = parse_value(text)
    if not isinstance(parsed, list) or not parsed:
        raise ConfigFormatError(f"Expected a non-empty list of numbers, got {source!r}")
    try:
        return np.asarray(parsed, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigFormatError(f"Expected a list of numbers, got {source!r}") from exc


def write_vector(path: Path, vector: np.ndarray) -> None:
    """One value per line at full precision."""
    lines = [repr(float(value)) for value in np.asarray(vector).reshape(-1)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
