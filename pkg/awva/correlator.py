"""
Auto-correlation intensity Theta(t) = int_0^t I1(t') I2(t') dt'.

The numeric path is a compensated cumulative trapezoid over sampled traces;
the analytic path integrates the Gaussian pointers in closed form and serves
as the oracle for the numeric one.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.special import erf

from awva.models import PointerParams, SampledTrace, ThetaTrace
from awva.utils.validators import validate_positive, validate_same_grid
from awva.weak_measurement import pulse_centers

logger = logging.getLogger(__name__)

SQRT_PI = math.sqrt(math.pi)
SQRT_2 = math.sqrt(2.0)


def compensated_cumsum(values):
    """
    Running sum with error-free-transformation correction.

    numpy's cumsum accumulates sequentially, so each rounding error of
    s[i] = fl(s[i-1] + x[i]) can be recovered exactly with TwoSum and the
    errors added back as a second (tiny) running sum.
    """
    x = np.asarray(values, dtype=np.float64)
    if x.size == 0:
        return x.copy()
    s = np.cumsum(x)
    previous = np.empty_like(s)
    previous[0] = 0.0
    previous[1:] = s[:-1]
    virtual = s - previous
    error = (previous - (s - virtual)) + (x - virtual)
    return s + np.cumsum(error)


def cumulative_trapezoid(values, dt: float):
    """Cumulative trapezoid with a leading zero, same length as `values`"""
    validate_positive('dt', dt)
    y = np.asarray(values, dtype=np.float64)
    result = np.zeros_like(y)
    if y.size > 1:
        increments = (y[:-1] + y[1:]) * (0.5 * dt)
        result[1:] = compensated_cumsum(increments)
    return result


def theta_numeric(a: SampledTrace, b: SampledTrace) -> ThetaTrace:
    """
    Running product-integral of two traces on the same grid

    Args:
        a: First channel
        b: Second channel, same start time, spacing and length

    Returns:
        ThetaTrace in V^2*s with values[0] == 0

    Raises:
        AlignmentError: The grids differ (no resampling is attempted)
    """
    validate_same_grid(a, b)
    product = a.samples * b.samples
    return ThetaTrace(a.start_time, a.dt, cumulative_trapezoid(product, a.dt))


@dataclass(frozen=True)
class StreamingState:
    """Constant-memory running integral (Kahan-Neumaier compensated)"""

    total: float = 0.0
    compensation: float = 0.0
    previous: Optional[float] = None
    count: int = 0

    @property
    def value(self) -> float:
        return self.total + self.compensation


def initial_state(zero_boundary: bool = False) -> StreamingState:
    """
    Fresh accumulator.

    With zero_boundary the product before the first sample is taken as 0, so
    the first sample already contributes half an interval.
    """
    return StreamingState(previous=0.0 if zero_boundary else None)


def streaming_update(state: StreamingState, x: float, y: float, dt: float) -> StreamingState:
    """Feed one sample pair and return the updated accumulator"""
    validate_positive('dt', dt)
    product = x * y
    if state.previous is None:
        return replace(state, previous=product, count=state.count + 1)

    increment = (state.previous + product) * (0.5 * dt)
    total = state.total + increment
    if abs(state.total) >= abs(increment):
        compensation = state.compensation + ((state.total - total) + increment)
    else:
        compensation = state.compensation + ((increment - total) + state.total)
    return StreamingState(total=total, compensation=compensation, previous=product, count=state.count + 1)


class StreamingIntegrator:
    """Mutable wrapper over StreamingState for sample-by-sample acquisition loops"""

    def __init__(self, zero_boundary: bool = False):
        self.state = initial_state(zero_boundary)

    def update(self, x: float, y: float, dt: float) -> float:
        self.state = streaming_update(self.state, x, y, dt)
        return self.state.value

    @property
    def value(self) -> float:
        return self.state.value

    @property
    def count(self) -> int:
        return self.state.count


def stream_traces(a: SampledTrace, b: SampledTrace, zero_boundary: bool = False) -> StreamingState:
    """Feed two traces sample by sample"""
    validate_same_grid(a, b)
    integrator = StreamingIntegrator(zero_boundary)
    for x, y in zip(a.samples.tolist(), b.samples.tolist()):
        integrator.update(x, y, a.dt)
    return integrator.state


def _gaussian_integral(scale: float, center: float, t):
    """int_0^t exp(-((s - center)/scale)^2) ds"""
    return 0.5 * SQRT_PI * scale * (erf((t - center) / scale) - erf(-center / scale))


def theta_analytic(params: PointerParams, shift: float, t):
    """
    Closed-form Theta(t) for the periodic pointer pair (I1 shifted, I2 not)

    The product of two offset pulse trains expands into Gaussian x Gaussian,
    Gaussian x offset and offset x offset terms, each integrated exactly
    through the error function. A Gaussian pair separated by d carries the
    attenuation exp(-d^2/w^2) = exp(-d^2/(8 omega^2)) and is centred halfway
    between the two pulses.

    Args:
        params: Pointer shape (offset included)
        shift: Displacement of I1 in seconds
        t: Upper integration limit(s) in seconds

    Returns:
        Theta(t) in V^2*s, same shape as t
    """
    t = np.asarray(t, dtype=np.float64)
    a = params.amplitude
    b = params.offset
    w = params.width
    shifted_centers = pulse_centers(params, shift)
    reference_centers = pulse_centers(params, 0.0)

    total = np.zeros_like(t)
    for c1 in shifted_centers:
        for c2 in reference_centers:
            separation = c1 - c2
            weight = a * a * math.exp(-(separation / w) ** 2)
            if weight == 0.0:
                continue
            total = total + weight * _gaussian_integral(0.5 * w, 0.5 * (c1 + c2), t)
    if b != 0.0:
        single_scale = w / SQRT_2
        for center in shifted_centers + reference_centers:
            total = total + a * b * _gaussian_integral(single_scale, center, t)
        total = total + b * b * t
    return float(total) if np.ndim(total) == 0 else total


def theta_analytic_trace(params: PointerParams, shift: float, grid: SampledTrace) -> ThetaTrace:
    """theta_analytic evaluated on a trace's grid, relative to its start"""
    values = theta_analytic(params, shift, grid.times) - theta_analytic(params, shift, grid.start_time)
    return ThetaTrace(grid.start_time, grid.dt, values)


def predicted_attenuation(params: PointerParams, delta_t: float) -> float:
    """Max[Theta(t; delta_t)] / Max[Theta(t)] for offset-free pointers"""
    return math.exp(-delta_t ** 2 / (8.0 * params.spread ** 2))
