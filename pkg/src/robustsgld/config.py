"""Configuration management for robustsgld."""

from __future__ import annotations

import logging
import os
from pathlib import Path
from typing import Any, Callable, Dict, Optional

from pydantic import ValidationError

from .models import ExperimentConfig
from .parser import ConfigError, UnknownConfigKeyError, load_config_file, parse_value

logger = logging.getLogger(__name__)

CONFIG_ENV = "ROBUSTSGLD_CONFIG"
OUTPUT_DIR_ENV = "ROBUSTSGLD_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = Path("runs")


def _as_bool(value: str) -> bool:
    return value.lower() in ("true", "1", "yes")


class ConfigManager:
    """Builds an ExperimentConfig from defaults, a file, the environment and overrides.

    Later sources win: model defaults < file < environment < overrides.
    """

    env_mappings: Dict[str, tuple[str, Callable[[str], Any]]] = {
        "ROBUSTSGLD_N_ITER": ("n_iter", int),
        "ROBUSTSGLD_SEEDS": ("seeds", parse_value),
        "ROBUSTSGLD_WORKERS": ("workers", int),
        "ROBUSTSGLD_SNAP_SAMPLES": ("snap_samples", _as_bool),
        OUTPUT_DIR_ENV: ("output_dir", str),
    }

    def __init__(self, config_path: Optional[Path] = None):
        self._explicit_path = config_path
        self._config_paths = self._get_config_paths()

    def _get_config_paths(self) -> list[Path]:
        """Potential configuration file paths in order of precedence."""
        if self._explicit_path is not None:
            return [self._explicit_path]

        paths = []
        if env_config := os.getenv(CONFIG_ENV):
            paths.append(Path(env_config))
        paths.append(Path.cwd() / "robustsgld.yaml")
        paths.append(Path.cwd() / "robustsgld.yml")
        paths.append(Path.home() / ".config" / "robustsgld" / "config.yaml")
        return paths

    def _load_file_data(self) -> Dict[str, Any]:
        if self._explicit_path is not None:
            return load_config_file(self._explicit_path)
        for path in self._config_paths:
            if path.exists() and path.is_file():
                logger.debug("Using configuration file %s", path)
                return load_config_file(path)
        return {}

    def _apply_env_overrides(self, config_data: Dict[str, Any]) -> None:
        for env_var, (key, converter) in self.env_mappings.items():
            if value := os.getenv(env_var):
                try:
                    config_data[key] = converter(value)
                except (ValueError, TypeError, ConfigError) as exc:
                    logger.warning("Invalid value for %s: %s (%s)", env_var, value, exc)

    def load_config(self, overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
        """Load and validate the configuration.

        Raises:
            UnknownConfigKeyError: If any source names a key that is not a field
            ConfigError: If the merged values fail validation
            FileNotFoundError: If an explicit config path does not exist
        """
        config_data = self._load_file_data()
        self._apply_env_overrides(config_data)
        config_data.update(overrides or {})

        valid = ExperimentConfig.valid_keys()
        unknown = set(config_data) - set(valid)
        if unknown:
            raise UnknownConfigKeyError(unknown, valid)

        try:
            return ExperimentConfig.model_validate(config_data)
        except ValidationError as exc:
            raise ConfigError(f"Invalid configuration: {exc}") from exc


def load_experiment_config(
    config_path: Optional[Path] = None, overrides: Optional[Dict[str, Any]] = None
) -> ExperimentConfig:
    return ConfigManager(config_path).load_config(overrides)


def resolve_output_dir(cli_value: Optional[Path], config: ExperimentConfig) -> Path:
    """Output directory: command line, then config/environment, then ``./runs``."""
    if cli_value is not None:
        return cli_value
    if config.output_dir is not None:
        return config.output_dir
    return DEFAULT_OUTPUT_DIR
