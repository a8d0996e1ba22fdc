"""
Utility functions for anisolve

Common helpers used across modules: logging setup, number formatting,
canonical JSON and config hashing.
"""

import hashlib
import json
import logging
import os
from typing import Any, Optional

import numpy as np
from dotenv import load_dotenv

from .constants import (
    CSV_FLOAT_FORMAT,
    DEFAULT_LOG_LEVEL,
    ENV_LOG_LEVEL,
    LOG_FORMAT,
    LOG_LEVELS,
)
from .exceptions import ConfigurationError


def configure_logging(level: Optional[str] = None) -> int:
    """
    Configure root logging on standard error

    The level comes from the argument, else from ANISOLVE_LOG (a .env file is
    honoured), else "info".

    Args:
        level: One of "error", "info", "debug"

    Returns:
        The numeric logging level that was applied

    Raises:
        ConfigurationError: If the level name is unknown
    """
    load_dotenv()
    name = (level or os.getenv(ENV_LOG_LEVEL) or DEFAULT_LOG_LEVEL).strip().lower()
    if name not in LOG_LEVELS:
        raise ConfigurationError(
            ENV_LOG_LEVEL, f"'{name}' is not one of {', '.join(LOG_LEVELS)}"
        )

    numeric = LOG_LEVELS[name]
    logging.basicConfig(level=numeric, format=LOG_FORMAT, force=True)
    return numeric


def format_float(value: float) -> str:
    """
    Format a float with 17 significant digits (bit-exact round trip)

    Example:
        >>> format_float(0.1)
        "0.10000000000000001"
    """
    return format(float(value), CSV_FLOAT_FORMAT)


def format_scientific(value: Optional[float], digits: int = 3) -> str:
    """Short scientific notation for console output; '-' for missing values"""
    if value is None:
        return "-"
    return f"{value:.{digits}e}"


def canonical_json(data: Any) -> str:
    """Serialize with sorted keys and no insignificant whitespace"""
    return json.dumps(data, sort_keys=True, separators=(",", ":"), default=_to_builtin)


def config_hash(config: dict) -> str:
    """
    SHA-256 of the canonical JSON form of a config

    Example:
        >>> config_hash({"b": 1, "a": 2}) == config_hash({"a": 2, "b": 1})
        True
    """
    return hashlib.sha256(canonical_json(config).encode("utf-8")).hexdigest()


def _to_builtin(obj: Any) -> Any:
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"Object of type {type(obj).__name__} is not JSON serializable")


def to_builtin(data: Any) -> Any:
    """Recursively convert numpy scalars/arrays inside reports to plain Python"""
    if isinstance(data, dict):
        return {key: to_builtin(value) for key, value in data.items()}
    if isinstance(data, (list, tuple)):
        return [to_builtin(value) for value in data]
    if isinstance(data, (np.generic, np.ndarray)):
        return _to_builtin(data)
    return data
