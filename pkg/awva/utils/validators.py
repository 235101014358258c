"""
Argument validators shared by the domain types and operations.

Each validator raises the project's own exceptions so callers can map them
onto CLI exit codes.
"""

import math

import numpy as np

from awva.errors import AlignmentError, ConfigurationError, DomainError

# Relative tolerance when comparing sample spacings of two traces
GRID_RTOL = 1e-9


def validate_finite(name, value):
    """Reject NaN and infinities"""
    if value is None or not math.isfinite(value):
        raise DomainError(f'{name} must be a finite number, got {value!r}')
    return value


def validate_positive(name, value, error=ConfigurationError):
    """Require value > 0"""
    validate_finite(name, value)
    if value <= 0:
        raise error(f'{name} must be > 0, got {value!r}')
    return value


def validate_non_negative(name, value, error=ConfigurationError):
    """Require value >= 0"""
    validate_finite(name, value)
    if value < 0:
        raise error(f'{name} must be >= 0, got {value!r}')
    return value


def validate_open_angle(alpha):
    """
    Require 0 < alpha < pi (post-selection angle)

    Args:
        alpha: Angle in radians

    Returns:
        alpha unchanged

    Raises:
        DomainError: alpha is outside the open interval (0, pi)
    """
    validate_finite('alpha', alpha)
    if not 0.0 < alpha < math.pi:
        raise DomainError(f'alpha must lie in (0, pi), got {alpha!r}')
    return alpha


def validate_nonzero(name, value):
    validate_finite(name, value)
    if value == 0:
        raise DomainError(f'{name} must be non-zero')
    return value


def validate_same_grid(a, b):
    """
    Require two traces to share start time, spacing and length.

    No resampling is ever attempted; mismatches are errors.
    """
    if len(a) != len(b):
        raise AlignmentError(f'trace lengths differ: {len(a)} != {len(b)}')
    if not math.isclose(a.dt, b.dt, rel_tol=GRID_RTOL, abs_tol=0.0):
        raise AlignmentError(f'sample spacings differ: {a.dt!r} != {b.dt!r}')
    if not math.isclose(a.start_time, b.start_time, rel_tol=0.0, abs_tol=a.dt * GRID_RTOL):
        raise AlignmentError(f'start times differ: {a.start_time!r} != {b.start_time!r}')


def as_sample_array(values, name='samples'):
    """Convert to a read-only 1-D float64 array"""
    array = np.array(values, dtype=np.float64, copy=True).reshape(-1)
    if array.size == 0:
        raise ConfigurationError(f'{name} must not be empty')
    array.setflags(write=False)
    return array
