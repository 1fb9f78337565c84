"""
User-level defaults for the forgetmari CLI.

This module manages the file at ~/.forgetmari/config.toml, environment
variable overrides, and default values. Experiment settings live in the
experiment JSON (see ``forgetmari.config``); this file only holds CLI
defaults.

Priority: CLI flag > env var > config file > default
"""

import os
from pathlib import Path
from typing import Any, Dict, Optional

try:
    import tomllib
except ImportError:
    import tomli as tomllib  # type: ignore

try:
    import tomli_w
except ImportError:
    tomli_w = None  # type: ignore

from forgetmari.config import _coerce_value, _deep_copy_dict, _merge_config

DEFAULTS = {
    "output": {
        "dir": "runs/forgetmari",
    },
    "detector": {
        "detector": "min_k",
        "k_fraction": 0.2,
    },
    "bounds": {
        "epsilon": 0.1,
    },
}

ENV_VAR_MAPPINGS = {
    "FORGETMARI_CONFIG": "config_path",
    "FORGETMARI_OUTPUT_DIR": ("output", "dir"),
}


def get_config_path() -> Path:
    """
    Get the path to the configuration file.

    Returns:
        Path to the config file, respecting FORGETMARI_CONFIG env var.
    """
    env_path = os.environ.get("FORGETMARI_CONFIG")
    if env_path:
        return Path(env_path).expanduser()
    return Path.home() / ".forgetmari" / "config.toml"


def load_config() -> Dict[str, Any]:
    """
    Load configuration from file and apply environment overrides.

    Priority: env var > config file > default
    """
    config = _deep_copy_dict(DEFAULTS)
    config_path = get_config_path()
    if config_path.exists():
        with open(config_path, "rb") as f:
            file_config = tomllib.load(f)
        config = _merge_config(config, file_config)
    return _apply_env_overrides(config)


def save_config(config: Dict[str, Any]) -> None:
    """
    Save configuration to the config file.

    Raises:
        ImportError: If tomli_w is not installed.
    """
    if tomli_w is None:
        raise ImportError(
            "tomli_w is required to save configuration.\nInstall with: pip install tomli-w"
        )
    config_path = get_config_path()
    config_path.parent.mkdir(parents=True, exist_ok=True)
    with open(config_path, "wb") as f:
        tomli_w.dump(config, f)


def get_value(config: Dict[str, Any], key: str) -> Any:
    """
    Get a configuration value by dot-separated key, or None if not found.
    """
    value = config
    for part in key.split("."):
        if isinstance(value, dict) and part in value:
            value = value[part]
        else:
            return None
    return value


def set_value(config: Dict[str, Any], key: str, value: Any) -> Dict[str, Any]:
    """
    Set a configuration value by dot-separated key.

    String values are coerced to bool/int/float where they parse as one.
    """
    parts = key.split(".")
    current = config
    for part in parts[:-1]:
        if part not in current:
            current[part] = {}
        current = current[part]
    if isinstance(value, str):
        value = _coerce_value(value)
    current[parts[-1]] = value
    return config


def get_default(key: str, config: Optional[Dict[str, Any]] = None) -> Any:
    """A CLI default by dotted key, falling back to the built-in DEFAULTS."""
    if config is None:
        config = load_config()
    value = get_value(config, key)
    return get_value(DEFAULTS, key) if value is None else value


def get_output_dir(config: Optional[Dict[str, Any]] = None) -> Path:
    if config is None:
        config = load_config()
    return Path(get_value(config, "output.dir") or DEFAULTS["output"]["dir"]).expanduser()


def _apply_env_overrides(config: Dict[str, Any]) -> Dict[str, Any]:
    result = _deep_copy_dict(config)
    for env_var, mapping in ENV_VAR_MAPPINGS.items():
        value = os.environ.get(env_var)
        if value is None or not isinstance(mapping, tuple):
            continue
        section, key = mapping
        result.setdefault(section, {})[key] = value
    return result
