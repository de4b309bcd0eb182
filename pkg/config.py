#!/usr/bin/env python3
"""
Configuration Management for gapforge

Centralized configuration handling with file and environment variable support.
"""

import copy
import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional

import yaml

from constants import DEFAULT_INSTANCE, PATHS, PENALTY_SCHEDULE
from exceptions import ConfigurationError
from validators import validate_override


class Config:
    """
    Configuration manager for gapforge

    Handles loading and managing configuration from multiple sources:
    - Environment variables
    - Configuration files (YAML or JSON)
    - Default values
    """

    CONFIG_FILES = ("gapforge_config.yaml", "gapforge_config.yml", "gapforge_config.json")

    def __init__(self, config_dir: str = PATHS["CONFIG_DIR"], config_file: Optional[str] = None):
        self.config_dir = Path(config_dir)
        self.config_file = Path(config_file) if config_file else None
        self.logger = logging.getLogger(__name__)

        # Default configuration
        self._defaults = {
            "instance": copy.deepcopy(DEFAULT_INSTANCE),

            # Integration and quadrature
            "integrator": {
                "steps_per_interval": 8,
                "refine": 8,
                "bracket_step": 1e-5,
            },

            "mollifier": {
                "nodes_per_axis": 5,
                "terminal_eps": 1e-3,
            },

            # Direct transcription multistart
            "optimizer": {
                "n_starts": 50,
                "N": 200,
                "max_evaluations": 4000,
                "substeps": 4,
                "initial_step": 0.5,
                "min_step": 1e-3,
                "penalty_schedule": list(PENALTY_SCHEDULE),
                "workers": 4,
                "start_noise": 0.3,
            },

            "planner": {
                "primitive_fraction": 0.2,
                "refinements": 3,
                "goal_tolerance": 1e-4,
                "goal_bias": 0.3,
                "max_expansions": 1000000,
                "polish": False,
            },

            "topology": {
                "shell_cap": 10000,
                "max_blocks": 1000000,
                "ballbox_samples": 1000,
                "ballbox_segments": 8,
                "coverage_threshold": 0.999,
            },

            # Occupation-measure LP
            "lp": {
                "solver": "pdhg",
                "n_mid_cells": 8,
                "n_slab_cells": 2,
                "n_rest_cells": 2,
                "n_cap_cells": 1,
                "n_cross": 5,
                "atoms_per_axis": 3,
                "degree": 2,
                "tolerance": 1e-4,
                "max_iterations": 200000,
                "stall_iterations": 10000,
                "memory_fraction": 0.5,
            },

            "separation": {
                "delta": 1e-3,
                "n_curves": 500,
                "N": 400,
            },

            "output": {
                "directory": PATHS["OUTPUT_DIR"],
            },

            # System settings
            "system": {
                "log_level": "INFO",
                "log_dir": PATHS["LOGS_DIR"],
                "log_to_file": True,
            },
        }

        self._config = self._load_config()

    def _load_config(self) -> Dict[str, Any]:
        """Load configuration from files and environment variables"""
        config = copy.deepcopy(self._defaults)

        config_file = self._find_config_file()
        if config_file is not None:
            file_config = self._read_file(config_file)
            config = self._merge_configs(config, file_config)
            self.logger.info(f"Loaded configuration from {config_file}")

        # Override with environment variables
        config = self._load_env_overrides(config)

        return config

    def _find_config_file(self) -> Optional[Path]:
        if self.config_file is not None:
            if not self.config_file.exists():
                raise ConfigurationError(f"Configuration file not found: {self.config_file}")
            return self.config_file
        for name in self.CONFIG_FILES:
            candidate = self.config_dir / name
            if candidate.exists():
                return candidate
        return None

    def _read_file(self, path: Path) -> Dict[str, Any]:
        try:
            with open(path, "r", encoding="utf-8") as f:
                if path.suffix == ".json":
                    data = json.load(f)
                else:
                    data = yaml.safe_load(f)
        except (OSError, ValueError, yaml.YAMLError) as e:
            raise ConfigurationError(f"Failed to load config file {path}: {e}")
        if data is None:
            return {}
        if not isinstance(data, dict):
            raise ConfigurationError(f"Config file {path} must contain a mapping")
        return data

    def _merge_configs(self, base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
        """Recursively merge configuration dictionaries"""
        result = base.copy()

        for key, value in override.items():
            if key in result and isinstance(result[key], dict) and isinstance(value, dict):
                result[key] = self._merge_configs(result[key], value)
            else:
                result[key] = value

        return result

    def _load_env_overrides(self, config: Dict[str, Any]) -> Dict[str, Any]:
        """Load configuration overrides from environment variables"""
        if os.getenv("GAPFORGE_OUT"):
            config["output"]["directory"] = os.getenv("GAPFORGE_OUT")

        if os.getenv("GAPFORGE_LOG_LEVEL"):
            config["system"]["log_level"] = os.getenv("GAPFORGE_LOG_LEVEL")

        workers = os.getenv("GAPFORGE_WORKERS")
        if workers:
            try:
                config["optimizer"]["workers"] = max(1, int(workers))
            except ValueError:
                self.logger.warning(f"Ignoring non-integer GAPFORGE_WORKERS={workers!r}")

        return config

    def get(self, key: str, default: Any = None) -> Any:
        """
        Get configuration value using dot notation

        Args:
            key: Configuration key (e.g., 'optimizer.N')
            default: Default value if key not found

        Returns:
            Configuration value
        """
        keys = key.split(".")
        value = self._config

        try:
            for k in keys:
                value = value[k]
            return value
        except (KeyError, TypeError):
            return default

    def set(self, key: str, value: Any) -> None:
        """
        Set configuration value using dot notation

        Args:
            key: Configuration key (e.g., 'optimizer.N')
            value: Value to set
        """
        keys = key.split(".")
        config = self._config

        for k in keys[:-1]:
            if k not in config:
                config[k] = {}
            config = config[k]

        config[keys[-1]] = value

    def known_keys(self) -> List[str]:
        """All dot-notation leaf keys of the default configuration"""
        return sorted(_flatten_keys(self._defaults))

    def apply_overrides(self, overrides: Iterable[str]) -> None:
        """
        Apply key=value overrides from the command line

        Args:
            overrides: Strings of the form 'section.key=value'; values are parsed as YAML scalars

        Raises:
            ConfigurationError: On unknown keys or malformed overrides
        """
        known = self.known_keys()
        for override in overrides:
            is_valid, message = validate_override(override, known)
            if not is_valid:
                raise ConfigurationError(message, override.partition("=")[0])
            key, _, raw = override.partition("=")
            try:
                value = yaml.safe_load(raw)
            except yaml.YAMLError as e:
                raise ConfigurationError(f"Cannot parse override {override!r}: {e}", key)
            self.set(key.strip(), value)
            self.logger.debug(f"Override applied: {key.strip()} = {value!r}")

    def save(self, path: Optional[str] = None) -> bool:
        """
        Save current configuration to file

        Returns:
            True if successful, False otherwise
        """
        try:
            config_file = Path(path) if path else self.config_dir / "gapforge_config.yaml"
            config_file.parent.mkdir(parents=True, exist_ok=True)
            with open(config_file, "w", encoding="utf-8") as f:
                yaml.safe_dump(self._config, f, sort_keys=True)
            self.logger.info(f"Configuration saved to {config_file}")
            return True
        except OSError as e:
            self.logger.error(f"Failed to save configuration: {e}")
            return False

    def reset_to_defaults(self) -> None:
        """Reset configuration to default values"""
        self._config = copy.deepcopy(self._defaults)
        self.logger.info("Configuration reset to defaults")

    def get_all(self) -> Dict[str, Any]:
        """Get all configuration as dictionary"""
        return copy.deepcopy(self._config)


def _flatten_keys(tree: Dict[str, Any], prefix: str = "") -> List[str]:
    keys = []
    for key, value in tree.items():
        full = f"{prefix}{key}"
        if isinstance(value, dict) and key != "control_set":
            keys.extend(_flatten_keys(value, f"{full}."))
        else:
            keys.append(full)
    return keys


# Global configuration instance
_config_instance: Optional[Config] = None


def get_config() -> Config:
    """Get the global configuration instance"""
    global _config_instance
    if _config_instance is None:
        _config_instance = Config()
    return _config_instance


def set_config(config: Optional[Config]) -> None:
    """Replace the global configuration instance (None resets it)"""
    global _config_instance
    _config_instance = config
