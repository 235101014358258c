"""
Weak-measurement signal generation.

Produces the post-selected pointer I1(t; tau), carrying the amplified shift
delta_t = tau*cot(alpha), and the unshifted reference I2(t), either from the
weak-measurement theory or from the experimental Gaussian parameterisation.
"""

import logging
import math
from typing import Tuple

import numpy as np

from awva.errors import ConfigurationError
from awva.models import MIN_SAMPLES_PER_PERIOD, PointerParams, SampledTrace, WeakMeasurementParams
from awva.utils.validators import validate_finite, validate_open_angle, validate_positive

logger = logging.getLogger(__name__)

# Pulse images evaluated around the wrapped centre; the pulse is narrower than a period
IMAGE_OFFSETS = (-1, 0, 1)


def weak_value(alpha: float) -> float:
    """
    Weak value A_w = -cot(alpha) of the pre/post-selected observable

    Args:
        alpha: Post-selection angle in radians, 0 < alpha < pi

    Returns:
        -cot(alpha); grows without bound as alpha -> 0+

    Raises:
        DomainError: alpha outside (0, pi)
    """
    validate_open_angle(alpha)
    return -math.cos(alpha) / math.sin(alpha)


def amplified_shift(tau: float, alpha: float) -> float:
    """Pointer displacement delta_t = tau * cot(alpha)"""
    validate_finite('tau', tau)
    return tau * -weak_value(alpha)


def postselection_probability(alpha: float) -> float:
    """|<Phi_f|Phi_i>|^2 = sin^2(alpha)"""
    validate_open_angle(alpha)
    return math.sin(alpha) ** 2


def theory_peak(params: WeakMeasurementParams) -> float:
    """Peak detected intensity (I0/2) sin^2(alpha) / (2 pi omega^2)^(1/4)"""
    prefactor = (2.0 * math.pi * params.omega ** 2) ** 0.25
    return 0.5 * params.I0 * postselection_probability(params.alpha) / prefactor


def theory_intensity(params: WeakMeasurementParams, t, shifted: bool = True):
    """
    Detected intensity of the post-selected channel.

    Args:
        params: Weak measurement parameters
        t: Time in seconds (scalar or array)
        shifted: True for the weakly coupled channel I1 (carries delta_t),
            False for the reference channel I2

    Returns:
        Intensity at t, same shape as t
    """
    shift = amplified_shift(params.tau, params.alpha) if shifted else 0.0
    u = np.asarray(t, dtype=np.float64) - params.t0 - shift
    value = theory_peak(params) * np.exp(-(u ** 2) / (4.0 * params.omega ** 2))
    return float(value) if np.ndim(value) == 0 else value


def pointer_from_theory(params: WeakMeasurementParams, frequency: float) -> PointerParams:
    """Express the theory pointer in the experimental A*exp[-2((t-t_c)/w)^2] + b form"""
    return PointerParams(
        amplitude=theory_peak(params),
        width=2.0 * math.sqrt(2.0) * params.omega,
        center=params.t0,
        offset=0.0,
        frequency=frequency,
    )


def eval_pointer(params: PointerParams, shift: float, t):
    """
    Evaluate A*exp[-2((t - t_c - shift)/w)^2] + b.

    shift = 0 gives the reference channel, shift = delta_t the displaced one.
    Accepts a scalar or an array of times.
    """
    u = (np.asarray(t, dtype=np.float64) - params.center - shift) / params.width
    value = params.amplitude * np.exp(-2.0 * u * u) + params.offset
    return float(value) if np.ndim(value) == 0 else value


def pulse_centers(params: PointerParams, shift: float) -> Tuple[float, ...]:
    """Centres of the pulse images that can overlap the period [0, T)"""
    period = params.period
    center = math.fmod(params.center + shift, period)
    if center < 0.0:
        center += period
    return tuple(center + k * period for k in IMAGE_OFFSETS)


def periodic_pointer(params: PointerParams, shift: float, t):
    """Generator waveform: one pulse per period, offset added once"""
    t = np.asarray(t, dtype=np.float64)
    value = np.zeros_like(t)
    for center in pulse_centers(params, shift):
        u = (t - center) / params.width
        value = value + params.amplitude * np.exp(-2.0 * u * u)
    return value + params.offset


def samples_per_period(params: PointerParams, sample_rate: float) -> int:
    validate_positive('sample_rate', sample_rate)
    if sample_rate < MIN_SAMPLES_PER_PERIOD * params.frequency:
        raise ConfigurationError(
            f'sample_rate {sample_rate!r} Hz gives fewer than {MIN_SAMPLES_PER_PERIOD} '
            f'samples per period at {params.frequency!r} Hz'
        )
    exact = sample_rate / params.frequency
    count = int(round(exact))
    if not math.isclose(count, exact, rel_tol=1e-9):
        logger.warning(f'sample_rate/frequency = {exact:.6f} is not an integer, rendering {count} samples')
    return count


def render_period(params: PointerParams, shift: float, sample_rate: float) -> SampledTrace:
    """
    Sample one repetition period [0, 1/f) of the generator waveform

    Args:
        params: Pointer shape
        shift: Displacement of the pulse in seconds
        sample_rate: Samples per second, at least 100 per period

    Returns:
        SampledTrace starting at 0 with dt = 1/sample_rate

    Raises:
        ConfigurationError: sample_rate below 100 samples per period
    """
    count = samples_per_period(params, sample_rate)
    dt = 1.0 / sample_rate
    times = np.arange(count) * dt
    return SampledTrace(0.0, dt, periodic_pointer(params, shift, times))


def render_channels(params: PointerParams, delta_t: float, sample_rate: float) -> Tuple[SampledTrace, SampledTrace]:
    """Displaced pointer I1 and reference I2 on a shared grid"""
    return render_period(params, delta_t, sample_rate), render_period(params, 0.0, sample_rate)
