"""
Tests for the numeric and analytic Theta and the streaming accumulator
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from awva.correlator import (
    StreamingIntegrator,
    compensated_cumsum,
    cumulative_trapezoid,
    initial_state,
    predicted_attenuation,
    stream_traces,
    streaming_update,
    theta_analytic,
    theta_analytic_trace,
    theta_numeric,
)
from awva.errors import AlignmentError
from awva.models import PointerParams, SampledTrace
from awva.weak_measurement import render_channels, render_period


def test_zero_traces_give_zero_theta():
    zeros = SampledTrace(0.0, 1e-6, np.zeros(100))
    theta = theta_numeric(zeros, zeros)
    assert np.all(theta.values == 0.0)


def test_constant_traces_give_rectangle_area():
    """1 V x 1 V over [0, 1 ms] at 1 us"""
    ones = SampledTrace(0.0, 1e-6, np.ones(1001))
    theta = theta_numeric(ones, ones)
    assert theta.values[0] == 0.0
    assert theta.final == pytest.approx(1.0e-3, rel=1e-12)


def test_mismatched_grids_are_rejected():
    a = SampledTrace(0.0, 1e-6, np.ones(10))
    with pytest.raises(AlignmentError):
        theta_numeric(a, SampledTrace(0.0, 1e-6, np.ones(11)))
    with pytest.raises(AlignmentError):
        theta_numeric(a, SampledTrace(0.0, 2e-6, np.ones(10)))
    with pytest.raises(AlignmentError):
        theta_numeric(a, SampledTrace(1e-6, 1e-6, np.ones(10)))


def test_compensated_cumsum_recovers_lost_bits():
    values = np.array([1.0] + [1e-16] * 10000)
    assert compensated_cumsum(values)[-1] == pytest.approx(1.0 + 1e-12, rel=1e-15)
    assert np.cumsum(values)[-1] == 1.0


def test_cumulative_trapezoid_of_linear_ramp():
    t = np.arange(11) * 0.1
    np.testing.assert_allclose(cumulative_trapezoid(t, 0.1), 0.5 * t ** 2, atol=1e-15)


def test_theta_symmetry_and_bilinearity(channels):
    shifted, reference = channels
    forward = theta_numeric(shifted, reference)
    backward = theta_numeric(reference, shifted)
    np.testing.assert_array_equal(forward.values, backward.values)

    scaled = theta_numeric(shifted.with_samples(3.0 * shifted.samples), reference)
    np.testing.assert_allclose(scaled.values, 3.0 * forward.values, rtol=1e-12, atol=1e-18)


@pytest.mark.parametrize('shift', [0.0, 5e-5, 1e-4])
def test_numeric_final_matches_analytic_oracle(pointer, shift):
    """5000 samples per period, offset included"""
    i1, i2 = render_channels(pointer, shift, 1e6)
    numeric = theta_numeric(i1, i2)
    analytic = theta_analytic_trace(pointer, shift, i1)
    assert numeric.final == pytest.approx(analytic.final, rel=1e-6)


def test_numeric_error_is_second_order(pointer):
    """Halving dt shrinks the error at t = T/2 about fourfold"""
    errors = []
    for sample_rate in (1e6, 2e6):
        i1, i2 = render_channels(pointer, 5e-5, sample_rate)
        numeric = theta_numeric(i1, i2)
        analytic = theta_analytic_trace(pointer, 5e-5, i1)
        middle = len(i1) // 2
        errors.append(abs(numeric.values[middle] - analytic.values[middle]))
    assert errors[1] > 0.0
    assert errors[0] / errors[1] >= 3.5


def test_analytic_full_period_integral(bare_pointer):
    """Integral of (A exp[-2(t/w)^2])^2 over one period is A^2 * omega * sqrt(2 pi)"""
    expected = bare_pointer.amplitude ** 2 * bare_pointer.spread * math.sqrt(2 * math.pi)
    assert theta_analytic(bare_pointer, 0.0, bare_pointer.period) == pytest.approx(expected, rel=1e-9)


def test_numeric_full_period_integral(bare_pointer):
    i1, i2 = render_channels(bare_pointer, 0.0, 1e6)
    expected = bare_pointer.amplitude ** 2 * bare_pointer.spread * math.sqrt(2 * math.pi)
    assert _closed_period(i1, i2) == pytest.approx(expected, rel=1e-6)


def test_analytic_at_zero_is_zero(pointer):
    assert theta_analytic(pointer, 5e-5, 0.0) == pytest.approx(0.0, abs=1e-20)


def _closed_period(i1, i2):
    """Theta over the whole period, closing the last interval back onto sample 0"""
    theta = theta_numeric(i1, i2)
    product = i1.samples * i2.samples
    return theta.final + 0.5 * (product[-1] + product[0]) * i1.dt


@pytest.mark.parametrize('delta_t', [2e-5, 5e-5, 1e-4])
def test_attenuation_law_without_offset(bare_pointer, delta_t):
    """Max[Theta(t; dt)] / Max[Theta(t)] = exp(-dt^2 / (8 omega^2))"""
    reference = _closed_period(*render_channels(bare_pointer, 0.0, 1e6))
    shifted = _closed_period(*render_channels(bare_pointer, delta_t, 1e6))
    assert shifted / reference == pytest.approx(predicted_attenuation(bare_pointer, delta_t), rel=1e-3)


@pytest.mark.parametrize('frequency, delta_t', [(200.0, 5e-5), (2000.0, 1e-5), (20000.0, 1e-6)])
def test_attenuation_holds_across_repetition_rates(frequency, delta_t):
    pointer = PointerParams.reference(frequency)
    bare = PointerParams(pointer.amplitude, pointer.width, pointer.center, 0.0, frequency)
    rate = 5000 * frequency
    ratio = _closed_period(*render_channels(bare, delta_t, rate)) / _closed_period(*render_channels(bare, 0.0, rate))
    assert ratio == pytest.approx(predicted_attenuation(bare, delta_t), rel=1e-3)


@pytest.mark.parametrize('frequency, delta_t, measured', [
    (200.0, 5e-5, 75.978 / 76.797),
    (200.0, 1e-4, 72.278 / 76.797),
    (20000.0, 1e-6, 6.4790 / 6.8856),
])
def test_predicted_ratio_agrees_with_measured_amplitudes(frequency, delta_t, measured):
    pointer = PointerParams.reference(frequency)
    assert predicted_attenuation(pointer, delta_t) == pytest.approx(measured, rel=1e-2)


def test_predicted_ratio_values():
    pointer = PointerParams.reference(200.0)
    assert predicted_attenuation(pointer, 5e-5) == pytest.approx(0.9835, abs=1e-4)
    assert predicted_attenuation(pointer, 1e-4) == pytest.approx(0.9357, abs=1e-4)


def test_streaming_matches_batch(channels):
    shifted, reference = channels
    state = stream_traces(shifted, reference)
    assert state.count == len(shifted)
    assert state.value == pytest.approx(theta_numeric(shifted, reference).final, rel=1e-12)


def test_streaming_empty_and_zero_boundary():
    assert initial_state().value == 0.0
    state = streaming_update(initial_state(zero_boundary=True), 1.0, 1.0, 1e-6)
    assert state.value == pytest.approx(0.5e-6)


def test_streaming_integrator_wrapper():
    integrator = StreamingIntegrator()
    for _ in range(1001):
        integrator.update(1.0, 1.0, 1e-6)
    assert integrator.count == 1001
    assert integrator.value == pytest.approx(1e-3, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(min_value=-1.0, max_value=1.0), min_size=2, max_size=200))
def test_streaming_equals_cumulative_trapezoid(values):
    a = SampledTrace(0.0, 1e-3, values)
    b = SampledTrace(0.0, 1e-3, np.ones(len(values)))
    assert stream_traces(a, b).value == pytest.approx(theta_numeric(a, b).final, rel=1e-12, abs=1e-15)


def test_analytic_trace_starts_at_zero():
    pointer = PointerParams.reference()
    grid = render_period(pointer, 0.0, 1e6)
    trace = theta_analytic_trace(pointer, 5e-5, grid)
    assert trace.values[0] == 0.0
    assert len(trace) == len(grid)
