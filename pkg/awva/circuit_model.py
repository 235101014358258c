"""
Behavioural model of the analog chain: four-quadrant multiplier feeding an
op-amp integrator, read out on an oscilloscope.

The observed trace is polarity * Gamma * Theta(t - t_phi): gains multiply,
the inverting integrator flips the sign and circuit capacitance delays the
output by t_phi. Both stages clip at their saturation bounds.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from awva.correlator import cumulative_trapezoid
from awva.errors import AlignmentError, CalibrationError
from awva.models import CircuitParams, SampledTrace, ThetaTrace
from awva.utils.validators import GRID_RTOL, validate_positive, validate_same_grid

logger = logging.getLogger(__name__)

# Default calibration search range as a fraction of the ideal trace duration
DEFAULT_SEARCH_FRACTION = 0.25
MIN_OVERLAP_FRACTION = 0.5


@dataclass(frozen=True)
class SaturationReport:
    """How many samples each stage clipped"""

    multiplier_clipped: int = 0
    integrator_clipped: int = 0

    @property
    def saturated(self) -> bool:
        return bool(self.multiplier_clipped or self.integrator_clipped)


def _clip(values, limit: Optional[float]):
    if limit is None:
        return values, 0
    clipped = np.clip(values, -limit, limit)
    count = int(np.count_nonzero(clipped != values))
    return clipped, count


def apply_multiplier(x, y, params: CircuitParams):
    """
    Multiplier stage output Gamma_M * x * y, clipped at the output bound

    Args:
        x: First input in volts (scalar or array)
        y: Second input in volts
        params: Circuit parameters

    Returns:
        Output voltage, same shape as the inputs
    """
    product = np.multiply(x, y) * params.gain_multiplier
    output, _ = _clip(product, params.multiplier_limit)
    return float(output) if np.ndim(output) == 0 else output


def integrate_product_with_report(product: SampledTrace,
                                  params: CircuitParams) -> Tuple[ThetaTrace, SaturationReport]:
    """
    Chain response to a multiplier input that is already formed

    Args:
        product: x*y at the multiplier inputs, V^2 per sample
        params: Circuit parameters

    Returns:
        Observed trace and the per-stage clip counts
    """
    scaled = product.samples * params.gain_multiplier
    scaled, multiplier_clipped = _clip(scaled, params.multiplier_limit)

    integrated = cumulative_trapezoid(scaled, product.dt) * params.gain_integrator
    integrated, integrator_clipped = _clip(integrated, params.integrator_limit)

    report = SaturationReport(multiplier_clipped, integrator_clipped)
    if report.saturated:
        logger.debug(
            f'circuit saturated: {multiplier_clipped} multiplier and '
            f'{integrator_clipped} integrator samples clipped'
        )
    observed = ThetaTrace(product.start_time + params.phase_lag, product.dt, params.polarity * integrated)
    return observed, report


def integrate_product(product: SampledTrace, params: CircuitParams) -> ThetaTrace:
    observed, _ = integrate_product_with_report(product, params)
    return observed


def apply_circuit_with_report(i1: SampledTrace, i2: SampledTrace,
                              params: CircuitParams) -> Tuple[ThetaTrace, SaturationReport]:
    """apply_circuit plus a count of clipped samples per stage"""
    validate_same_grid(i1, i2)
    return integrate_product_with_report(i1.with_samples(i1.samples * i2.samples), params)


def apply_circuit(i1: SampledTrace, i2: SampledTrace, params: CircuitParams) -> ThetaTrace:
    """
    Map two input channels to the scope-observed integrator output.

    The phase lag relabels the output grid (start_time + t_phi); samples are
    never resampled.

    Raises:
        AlignmentError: the inputs are on different grids
    """
    observed, _ = apply_circuit_with_report(i1, i2, params)
    return observed


def calibrate_phase(observed: ThetaTrace, ideal: ThetaTrace,
                    circuit: Optional[CircuitParams] = None,
                    max_shift: Optional[float] = None) -> float:
    """
    Recover the phase lag t_phi by curve alignment

    For every candidate lag on the dt grid the observed trace is compared to
    polarity * Gamma * ideal(t - t_phi); without circuit parameters the
    scale (gain and sign together) is fitted by least squares per candidate.

    Args:
        observed: Scope trace
        ideal: Noise-free Theta on the same sample spacing
        circuit: Known gain and polarity, optional
        max_shift: Half-width of the search around the grid offset, seconds

    Returns:
        Lag in seconds, resolved to one sample spacing

    Raises:
        AlignmentError: different sample spacings
        CalibrationError: flat traces or no unique minimum
    """
    if not math.isclose(observed.dt, ideal.dt, rel_tol=GRID_RTOL):
        raise AlignmentError(f'sample spacings differ: {observed.dt!r} != {ideal.dt!r}')
    o = observed.values
    theta = ideal.values
    if np.ptp(theta) == 0.0 or np.ptp(o) == 0.0:
        raise CalibrationError('cannot align flat traces')

    dt = ideal.dt
    base = observed.start_time - ideal.start_time
    if max_shift is None:
        max_shift = DEFAULT_SEARCH_FRACTION * len(ideal) * dt
    validate_positive('max_shift', max_shift)
    reach = int(round(max_shift / dt))
    min_overlap = int(MIN_OVERLAP_FRACTION * min(len(o), len(theta)))

    misfits = {}
    for m in range(-reach, reach + 1):
        start = max(0, m)
        stop = min(len(o), len(theta) + m)
        if stop - start < max(min_overlap, 2):
            continue
        segment = o[start:stop]
        reference = theta[start - m:stop - m]
        if circuit is not None:
            model = circuit.polarity * circuit.composite_gain * reference
        else:
            energy = float(np.dot(reference, reference))
            if energy == 0.0:
                continue
            model = (float(np.dot(segment, reference)) / energy) * reference
        residual = segment - model
        misfits[m] = float(np.dot(residual, residual)) / residual.size

    if not misfits:
        raise CalibrationError('no candidate lag leaves enough overlap between the traces')

    best = min(misfits, key=misfits.get)
    best_misfit = misfits[best]
    tolerance = best_misfit * 1e-12
    ties = [m for m, value in misfits.items() if value - best_misfit <= tolerance]
    if len(ties) > 1:
        raise CalibrationError(f'misfit minimum is not unique ({len(ties)} candidate lags tie)')

    lag = base + best * dt
    logger.debug(f'calibrated phase lag {lag * 1e6:.3f} us (misfit {best_misfit:.3e})')
    return lag
