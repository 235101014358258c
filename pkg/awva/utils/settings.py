"""
Utility functions for runtime settings
"""

import os
import logging

logger = logging.getLogger(__name__)

# Cache for settings to avoid re-reading the environment in hot loops
_settings_cache = {}
_cache_valid = False


def get_setting(key: str, default: str = None) -> str:
    """
    Get runtime setting value by key

    Args:
        key: Environment variable name
        default: Default value if the variable is unset or empty

    Returns:
        Setting value or default
    """
    global _settings_cache, _cache_valid

    if _cache_valid and key in _settings_cache:
        return _settings_cache[key]

    value = os.environ.get(key)
    if not value:
        # Defaults are not cached; callers pass their own
        return default
    _settings_cache[key] = value
    _cache_valid = True
    return value


def get_setting_int(key: str, default: int = None) -> int:
    """Get runtime setting as integer"""
    value = get_setting(key, str(default) if default is not None else None)
    if value is None:
        return default
    try:
        return int(value)
    except (ValueError, TypeError):
        logger.warning(f"Invalid integer value for setting {key}: {value}, using default {default}")
        return default


def get_setting_float(key: str, default: float = None) -> float:
    """Get runtime setting as float"""
    value = get_setting(key, repr(default) if default is not None else None)
    if value is None:
        return default
    try:
        return float(value)
    except (ValueError, TypeError):
        logger.warning(f"Invalid float value for setting {key}: {value}, using default {default}")
        return default


def invalidate_cache():
    """Invalidate settings cache (call after changing the environment)"""
    global _settings_cache, _cache_valid
    _settings_cache = {}
    _cache_valid = False


# Convenience functions for commonly used settings
def get_default_workers(default: int = 1) -> int:
    """Worker processes for Monte Carlo runs, at least 1"""
    workers = get_setting_int('AWVA_WORKERS', default)
    if workers is None or workers < 1:
        logger.warning(f"AWVA_WORKERS={workers} is below 1, using 1")
        return 1
    return workers


def get_default_trials(default: int = 10000) -> int:
    return get_setting_int('AWVA_DEFAULT_TRIALS', default)


def get_output_dir(default: str = 'results') -> str:
    return get_setting('AWVA_OUTPUT_DIR', default)


def get_max_failure_fraction(default: float = 0.05) -> float:
    """Share of failed trials tolerated before a sweep exits with an estimation failure"""
    fraction = get_setting_float('AWVA_MAX_FAILURE_FRACTION', default)
    if fraction is None or not 0.0 <= fraction <= 1.0:
        logger.warning(f"AWVA_MAX_FAILURE_FRACTION={fraction} is outside [0, 1], using {default}")
        return default
    return fraction
