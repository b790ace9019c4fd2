"""
Configuration loading for ASTRA AoI Tools.
Reads the JSON experiment file and applies command-line overrides on top of it.
"""

import json
import logging

from pydantic import ValidationError

from astra_aoi_tools.utils.errors import ConfigError
from astra_aoi_tools.utils.models import ExperimentConfig

logger = logging.getLogger(__name__)


def load_config(path=None):
    """
    Loads an experiment configuration.

    Args:
        path (str, optional): Path to a JSON config file. Defaults are used when omitted.

    Returns:
        ExperimentConfig: The validated configuration
    """
    if path is None:
        return ExperimentConfig()

    try:
        with open(path, 'r', encoding='utf-8') as fh:
            raw = fh.read()
    except OSError as exc:
        raise ConfigError(f"Cannot read config file {path}: {exc}") from exc

    try:
        data = json.loads(raw) if raw.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError(f"Config file {path} is not valid JSON: {exc}") from exc

    if not isinstance(data, dict):
        raise ConfigError(f"Config file {path} must contain a JSON object")

    try:
        config = ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"Config file {path} is invalid:\n{exc}") from exc

    logger.debug("Loaded config from %s", path)
    return config


def apply_overrides(config: ExperimentConfig, overrides):
    """
    Applies overrides, given as {"section.field": value} or {"seed": value}, to a config.

    Values that are None are skipped, so argparse namespaces can be passed through
    without filtering.

    Args:
        config (ExperimentConfig): Base configuration
        overrides (dict): Dotted keys mapped to new values

    Returns:
        ExperimentConfig: A new, re-validated configuration
    """
    data = config.model_dump()
    for key, value in overrides.items():
        if value is None:
            continue
        section, _, field = key.partition('.')
        if not field:
            if section not in data:
                raise ConfigError(f"Unknown config key {key!r}")
            data[section] = value
            continue
        if section not in data or not isinstance(data[section], dict) or field not in data[section]:
            raise ConfigError(f"Unknown config key {key!r}")
        data[section][field] = value

    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"Invalid override:\n{exc}") from exc
