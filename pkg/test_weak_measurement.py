"""
Tests for pointer generation and the weak-value relations
"""

import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from awva.errors import ConfigurationError, DomainError
from awva.models import PointerParams, WeakMeasurementParams
from awva.weak_measurement import (
    amplified_shift,
    eval_pointer,
    pointer_from_theory,
    postselection_probability,
    pulse_centers,
    render_channels,
    render_period,
    theory_intensity,
    weak_value,
)


def test_weak_value_at_quarter_angle():
    """-cot(pi/4) == -1"""
    assert weak_value(math.pi / 4) == pytest.approx(-1.0)


def test_weak_value_vanishes_at_right_angle():
    assert weak_value(math.pi / 2) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize('alpha', [0.0, math.pi, -0.1, 4.0, math.nan, math.inf])
def test_weak_value_rejects_closed_angles(alpha):
    with pytest.raises(DomainError):
        weak_value(alpha)


@given(st.floats(min_value=1e-4, max_value=1.5), st.floats(min_value=1e-4, max_value=1.5))
def test_weak_value_grows_as_alpha_shrinks(a, b):
    """Smaller post-selection angle, larger |A_w|"""
    small, large = sorted((a, b))
    assume(large - small > 1e-9)
    assert abs(weak_value(small)) > abs(weak_value(large))


def test_amplified_shift_examples():
    assert amplified_shift(1e-6, math.pi / 4) == pytest.approx(1e-6)
    assert amplified_shift(1e-7, 0.01) == pytest.approx(1e-7 / math.tan(0.01))
    assert amplified_shift(0.0, 0.3) == 0.0


def test_postselection_probability():
    assert postselection_probability(math.pi / 2) == pytest.approx(1.0)
    assert postselection_probability(0.01) == pytest.approx(math.sin(0.01) ** 2)


def test_theory_intensity_peaks_at_shifted_centre():
    params = WeakMeasurementParams(alpha=math.pi / 4, tau=1e-5, omega=5e-5, t0=2e-4)
    t = np.linspace(0.0, 5e-4, 50001)
    shifted = theory_intensity(params, t, shifted=True)
    reference = theory_intensity(params, t, shifted=False)
    assert t[np.argmax(shifted)] == pytest.approx(2.1e-4, abs=2e-8)
    assert t[np.argmax(reference)] == pytest.approx(2e-4, abs=2e-8)
    assert shifted.max() == pytest.approx(reference.max())


def test_pointer_from_theory_matches_theory_shape():
    """A*exp[-2(u/w)^2] with w = 2*sqrt(2)*omega equals the theory Gaussian"""
    params = WeakMeasurementParams(alpha=0.5, tau=2e-6, omega=4e-5, t0=1e-4)
    pointer = pointer_from_theory(params, frequency=200.0)
    assert pointer.width == pytest.approx(2 * math.sqrt(2) * 4e-5)
    assert pointer.spread == pytest.approx(4e-5)
    t = np.linspace(0.0, 4e-4, 401)
    np.testing.assert_allclose(
        eval_pointer(pointer, 0.0, t),
        theory_intensity(params, t, shifted=False),
        rtol=1e-12,
    )


def test_eval_pointer_reference_peak():
    pointer = PointerParams.reference()
    assert eval_pointer(pointer, 0.0, 1.71e-4) == pytest.approx(0.238)
    assert eval_pointer(pointer, 5e-5, 2.21e-4) == pytest.approx(0.238)


def test_reference_pointer_scales_with_frequency():
    pointer = PointerParams.reference(2000.0)
    assert pointer.width == pytest.approx(3.88e-5)
    assert pointer.center == pytest.approx(1.71e-5)
    assert pointer.amplitude == 0.248
    assert pointer.offset == -0.01
    assert pointer.width * pointer.frequency == pytest.approx(3.88e-4 * 200.0)


def test_pointer_wider_than_period_is_rejected():
    with pytest.raises(ConfigurationError):
        PointerParams(amplitude=0.2, width=6e-3, center=1e-4, offset=0.0, frequency=200.0)


def test_pulse_centers_wrap_into_period(pointer):
    centers = pulse_centers(pointer, pointer.period + 5e-5)
    assert centers[1] == pytest.approx(2.21e-4)
    assert centers[2] - centers[1] == pytest.approx(pointer.period)


def test_render_period_grid(pointer):
    trace = render_period(pointer, 0.0, 1e6)
    assert len(trace) == 5000
    assert trace.dt == pytest.approx(1e-6)
    assert trace.start_time == 0.0
    assert int(np.argmax(trace.samples)) == 171
    assert trace.samples.max() == pytest.approx(0.238)


def test_render_channels_shift_peak(channels):
    shifted, reference = channels
    assert int(np.argmax(shifted.samples)) == 221
    assert int(np.argmax(reference.samples)) == 171
    assert shifted.start_time == reference.start_time


def test_render_period_rejects_coarse_sampling(pointer):
    """Fewer than 100 samples per period"""
    with pytest.raises(ConfigurationError):
        render_period(pointer, 0.0, 200.0 * 99)


def test_render_period_holds_full_pulse_mass(bare_pointer):
    """One period of the periodic waveform integrates to the whole-line Gaussian integral"""
    trace = render_period(bare_pointer, 0.0, 1e6)
    area = float(np.sum(trace.samples)) * trace.dt
    expected = bare_pointer.amplitude * bare_pointer.width * math.sqrt(math.pi / 2)
    assert area == pytest.approx(expected, rel=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.floats(min_value=-2e-3, max_value=2e-3))
def test_shift_moves_the_peak(shift):
    pointer = PointerParams.reference()
    trace = render_period(pointer, shift, 1e6)
    peak_time = trace.times[int(np.argmax(trace.samples))]
    expected = pulse_centers(pointer, shift)[1]
    assert abs(math.remainder(peak_time - expected, pointer.period)) <= 1e-6
