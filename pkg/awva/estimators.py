"""
AWVA and SWVA readouts plus their Monte Carlo statistics.

AWVA reads the amplitude Max[Theta] of the integrator output with and
without the shift and turns the drop into the sensitivity K; SWVA reads the
delay of the noisy pointer directly off the scope trace.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.ndimage import uniform_filter1d

from awva.circuit_model import apply_circuit, integrate_product
from awva.errors import ConfigurationError, EstimationError, EstimationFailureThreshold
from awva.models import (
    DEFAULT_SCOPE_SPAN_FRACTION,
    DEFAULT_SMOOTHER_FRACTION,
    SWVA_METHODS,
    AmplitudeReading,
    NoiseSpec,
    PointerParams,
    SampledTrace,
    SensitivityStats,
    ThetaTrace,
    TrialConfig,
)
from awva.noise_harness import (
    STREAM_REFERENCE_A,
    STREAM_REFERENCE_B,
    STREAM_SHIFTED_I1,
    STREAM_SHIFTED_I2,
    add_noise,
    analog_product,
    gen_noise,
    readout_generator,
    snr_db,
    trial_seed,
)
from awva.utils.validators import validate_nonzero
from awva.weak_measurement import periodic_pointer, pulse_centers, render_channels

logger = logging.getLogger(__name__)

# 1 V/s expressed in mV/us
MV_PER_US = 1e-3


def read_amplitude(theta: ThetaTrace, polarity: int = 1,
                   window: Optional[Tuple[float, float]] = None) -> AmplitudeReading:
    """
    Scope amplitude cursor on a Theta trace

    Args:
        theta: Observed or ideal Theta
        polarity: Circuit polarity; the trace is multiplied by it so an
            inverting integrator reads positive
        window: Optional (start, stop) analysis window in seconds

    Returns:
        Signed extremum of largest magnitude and its time

    Raises:
        EstimationError: empty window or identically zero trace
    """
    values = polarity * theta.values
    times = theta.times
    if window is not None:
        start, stop = window
        mask = (times >= start) & (times <= stop)
        values = values[mask]
        times = times[mask]
    if values.size == 0:
        raise EstimationError('analysis window contains no samples')
    index = int(np.argmax(np.abs(values)))
    if values[index] == 0.0:
        raise EstimationError('Theta is identically zero, no amplitude to read')
    return AmplitudeReading(max_value=float(values[index]), max_time=float(times[index]))


def aggregate_readings(readings: Sequence[AmplitudeReading]) -> AmplitudeReading:
    """Mean +- population std over C acquisitions"""
    if not readings:
        raise ConfigurationError('no amplitude readings to aggregate')
    stats = RunningStats()
    for reading in readings:
        stats.push(reading.max_value)
    times = [reading.max_time for reading in readings]
    return AmplitudeReading(
        max_value=stats.mean,
        max_time=float(np.mean(times)),
        trials=stats.count,
        std_dev=stats.std_dev,
    )


def sensitivity_K(max_theta_ref: float, max_theta_shifted: float, delta_t: float) -> float:
    """
    K = (Max[Theta(t)] - Max[Theta(t; dt)]) / dt in mV/us

    Amplitudes are in volts and delta_t in seconds. K is positive when the
    shift attenuates the peak.

    Raises:
        DomainError: delta_t == 0
    """
    validate_nonzero('delta_t', delta_t)
    return (max_theta_ref - max_theta_shifted) / delta_t * MV_PER_US


def normalize_awva(K: float, K_ref: float) -> float:
    """K^A = K(N_A) / K(N_A = 0)"""
    validate_nonzero('K_ref', K_ref)
    return K / K_ref


def normalize_swva(delta_t_scope: float, delta_t_true: float) -> float:
    """K^W = dt_scope / dt; K^S in tabulated results is the same quantity"""
    validate_nonzero('delta_t_true', delta_t_true)
    return delta_t_scope / delta_t_true


def _wrap_delay(delay: float, period: float) -> float:
    """Wrap into (-T/2, T/2]"""
    wrapped = math.remainder(delay, period)
    if wrapped <= -0.5 * period:
        wrapped += period
    return wrapped


def _smoothing_window(template: PointerParams, dt: float, fraction: float) -> int:
    size = int(round(fraction * template.width / dt))
    if size % 2 == 0:
        size += 1
    return max(size, 1)


def _smoothed(samples: np.ndarray, size: int) -> np.ndarray:
    if size > 1:
        return uniform_filter1d(samples, size=size, mode='wrap')
    return samples


def _smoothed_peak(trace: SampledTrace, template: PointerParams, fraction: float) -> float:
    samples = _smoothed(trace.samples, _smoothing_window(template, trace.dt, fraction))
    if np.ptp(samples) == 0.0:
        raise EstimationError('pointer trace is flat, no peak to locate')
    peak_time = trace.start_time + int(np.argmax(samples)) * trace.dt
    return peak_time - pulse_centers(template, 0.0)[1]


def half_maximum_time(template: PointerParams) -> float:
    """Rising half-maximum crossing of the unshifted pulse, where the scope triggers"""
    return template.center - template.width * math.sqrt(0.5 * math.log(2.0))


def _display_indices(trace: SampledTrace, template: PointerParams, span_fraction: float) -> np.ndarray:
    """Unwrapped sample indices of the scope screen, centred on the trigger"""
    half_span = 0.5 * span_fraction * template.period
    center = half_maximum_time(template) - trace.start_time
    first = math.ceil((center - half_span) / trace.dt)
    last = math.floor((center + half_span) / trace.dt)
    return np.arange(first, last + 1)


def _first_rising_crossing(samples: np.ndarray, indices: np.ndarray, level: float) -> Optional[float]:
    """Fractional index of the first upward crossing of `level`, linearly interpolated"""
    values = np.take(samples, indices, mode='wrap')
    below = values < level
    hits = np.flatnonzero(below[:-1] & ~below[1:])
    if hits.size == 0:
        return None
    j = int(hits[0])
    fraction = (level - values[j]) / (values[j + 1] - values[j])
    return float(indices[j]) + fraction


def _edge_delay(trace: SampledTrace, template: PointerParams, fraction: float, span_fraction: float) -> float:
    size = _smoothing_window(template, trace.dt, fraction)
    indices = _display_indices(trace, template, span_fraction)
    level = template.offset + 0.5 * template.amplitude
    clean = _smoothed(periodic_pointer(template, 0.0, trace.times), size)
    reference = _first_rising_crossing(clean, indices, level)
    if reference is None:
        raise EstimationError('the unshifted pulse has no rising edge on the scope screen')
    measured = _first_rising_crossing(_smoothed(trace.samples, size), indices, level)
    if measured is None:
        raise EstimationError('no rising half-maximum crossing on the scope screen')
    return (measured - reference) * trace.dt


def _matched_lag(trace: SampledTrace, template: PointerParams) -> float:
    x = trace.samples - np.mean(trace.samples)
    if np.ptp(x) == 0.0:
        raise EstimationError('pointer trace is flat, nothing to correlate')
    reference = periodic_pointer(template, 0.0, trace.times)
    reference = reference - np.mean(reference)

    n = len(trace)
    correlation = np.fft.irfft(np.fft.rfft(x) * np.conj(np.fft.rfft(reference)), n)
    k = int(np.argmax(correlation))
    left = correlation[(k - 1) % n]
    center = correlation[k]
    right = correlation[(k + 1) % n]
    curvature = left - 2.0 * center + right
    offset = 0.5 * (left - right) / curvature if curvature < 0.0 else 0.0
    return (k + offset) * trace.dt


def swva_delay_estimate(noisy_i1: SampledTrace, template: PointerParams, method: str = 'smoothed',
                        smoother_fraction: float = DEFAULT_SMOOTHER_FRACTION,
                        scope_span_fraction: float = DEFAULT_SCOPE_SPAN_FRACTION) -> float:
    """
    Direct scope readout of the pointer displacement dt^Scope

    Args:
        noisy_i1: One full period of the (noisy) displaced pointer
        template: Unshifted pointer shape
        method: 'smoothed' (moving-average argmax), 'matched' (circular
            cross-correlation with the clean template) or 'edge' (first
            rising half-maximum crossing on a screen centred at the trigger)
        smoother_fraction: Moving-average window as a fraction of w; 0 gives
            the raw trace
        scope_span_fraction: Screen span for 'edge', as a fraction of T

    Returns:
        Delay in seconds relative to the unshifted template, wrapped into
        (-T/2, T/2]

    Raises:
        ConfigurationError: unknown method or a trace shorter than one period
        EstimationError: no identifiable peak or edge
    """
    if method not in SWVA_METHODS:
        raise ConfigurationError(f'unknown SWVA method {method!r}')
    period = template.period
    if noisy_i1.duration < period - 0.5 * noisy_i1.dt:
        raise ConfigurationError(
            f'trace covers {noisy_i1.duration!r} s, less than one period of {period!r} s'
        )
    if method == 'matched':
        delay = _matched_lag(noisy_i1, template)
    elif method == 'edge':
        delay = _edge_delay(noisy_i1, template, smoother_fraction, scope_span_fraction)
    else:
        delay = _smoothed_peak(noisy_i1, template, smoother_fraction)
    return _wrap_delay(delay, period)


@dataclass
class RunningStats:
    """One-pass mean/variance (Welford) that merges across workers (Chan)"""

    count: int = 0
    mean: float = 0.0
    m2: float = 0.0

    def push(self, value: float):
        self.count += 1
        delta = value - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (value - self.mean)

    def extend(self, values: Iterable[float]):
        for value in values:
            self.push(value)
        return self

    def merge(self, other: 'RunningStats') -> 'RunningStats':
        if other.count == 0:
            return RunningStats(self.count, self.mean, self.m2)
        if self.count == 0:
            return RunningStats(other.count, other.mean, other.m2)
        count = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * other.count / count
        m2 = self.m2 + other.m2 + delta * delta * self.count * other.count / count
        return RunningStats(count, mean, m2)

    @property
    def variance(self) -> float:
        """Population variance"""
        if self.count == 0:
            return math.nan
        return max(self.m2 / self.count, 0.0)

    @property
    def std_dev(self) -> float:
        return math.sqrt(self.variance)


@dataclass(frozen=True)
class TrialContext:
    """Noise-free quantities shared by every trial of one configuration"""

    shifted: SampledTrace
    reference: SampledTrace
    reference_max: float
    shifted_max: float
    k_ref: float
    snr: float


def prepare_context(config: TrialConfig) -> TrialContext:
    """
    Render the clean channels and the noise-free AWVA reference K_ref

    Raises:
        DomainError: delta_t == 0 or a zero noise-free sensitivity
    """
    validate_nonzero('delta_t', config.delta_t)
    shifted, reference = render_channels(config.pointer, config.delta_t, config.sample_rate)
    polarity = config.circuit.polarity
    reference_max = read_amplitude(apply_circuit(reference, reference, config.circuit), polarity).max_value
    shifted_max = read_amplitude(apply_circuit(shifted, reference, config.circuit), polarity).max_value
    k_ref = sensitivity_K(reference_max, shifted_max, config.delta_t)
    validate_nonzero('noise-free sensitivity K_ref', k_ref)
    signal_peak = float(np.max(np.abs(shifted.samples)))
    return TrialContext(
        shifted=shifted,
        reference=reference,
        reference_max=reference_max,
        shifted_max=shifted_max,
        k_ref=k_ref,
        snr=snr_db(signal_peak, config.noise_amplitude),
    )


@dataclass(frozen=True)
class TrialOutcome:
    """Readings of one trial; NaN marks an estimator that failed"""

    index: int
    reference_max: float
    shifted_max: float
    sensitivity: float
    awva: float
    delay: float
    swva: float


def _noise_spec(config: TrialConfig, index: int, stream: int) -> NoiseSpec:
    return config.noise_spec(trial_seed(config.base_seed, index, stream))


def run_single_trial(config: TrialConfig, context: TrialContext, index: int) -> TrialOutcome:
    """
    One Monte Carlo trial; fully determined by (base_seed, index)

    Both Max[Theta] readings come from noisy acquisitions: the reference from
    two unshifted channels, the shifted one from (I1, I2). SWVA reads the
    sampled noisy I1 off the scope.
    """
    circuit = config.circuit
    options = config.estimator
    shifted_spec = _noise_spec(config, index, STREAM_SHIFTED_I1)

    reference_product = analog_product(
        context.reference, context.reference,
        _noise_spec(config, index, STREAM_REFERENCE_A),
        _noise_spec(config, index, STREAM_REFERENCE_B),
        config.correlated_noise,
    )
    shifted_product = analog_product(
        context.shifted, context.reference,
        shifted_spec,
        _noise_spec(config, index, STREAM_SHIFTED_I2),
        config.correlated_noise,
    )
    noisy_i1 = add_noise(context.shifted, gen_noise(context.shifted, shifted_spec))

    reference_max = shifted_max = sensitivity = awva = math.nan
    try:
        reference_max = read_amplitude(integrate_product(reference_product, circuit), circuit.polarity).max_value
        shifted_max = read_amplitude(integrate_product(shifted_product, circuit), circuit.polarity).max_value
        if options.readout_noise > 0.0:
            jitter = readout_generator(config.base_seed, index).normal(0.0, options.readout_noise, 2)
            reference_max += float(jitter[0])
            shifted_max += float(jitter[1])
        sensitivity = sensitivity_K(reference_max, shifted_max, config.delta_t)
        awva = normalize_awva(sensitivity, context.k_ref)
    except EstimationError as e:
        logger.debug(f'trial {index}: AWVA readout failed: {e}')

    delay = swva = math.nan
    try:
        delay = swva_delay_estimate(
            noisy_i1, config.pointer, options.swva_method, options.smoother_fraction, options.scope_span_fraction,
        )
        swva = normalize_swva(delay, config.delta_t)
    except EstimationError as e:
        logger.debug(f'trial {index}: SWVA readout failed: {e}')

    return TrialOutcome(index, reference_max, shifted_max, sensitivity, awva, delay, swva)


def run_trial_range(config: TrialConfig, start: int, stop: int) -> List[TrialOutcome]:
    """Trials [start, stop) in index order"""
    context = prepare_context(config)
    return [run_single_trial(config, context, index) for index in range(start, stop)]


def _finite_stats(values: np.ndarray) -> RunningStats:
    return RunningStats().extend(float(v) for v in values if math.isfinite(v))


@dataclass(frozen=True)
class TrialBatch:
    """Per-trial arrays of one Monte Carlo run, indexed by trial number"""

    config: TrialConfig
    context: TrialContext
    reference_max: np.ndarray
    shifted_max: np.ndarray
    sensitivity: np.ndarray
    awva: np.ndarray
    delay: np.ndarray
    swva: np.ndarray
    workers: int = field(default=1, compare=False)

    @classmethod
    def from_outcomes(cls, config, context, outcomes: Sequence[TrialOutcome], workers: int = 1) -> 'TrialBatch':
        ordered = sorted(outcomes, key=lambda outcome: outcome.index)

        def column(name):
            return np.array([getattr(outcome, name) for outcome in ordered], dtype=np.float64)

        return cls(
            config=config,
            context=context,
            reference_max=column('reference_max'),
            shifted_max=column('shifted_max'),
            sensitivity=column('sensitivity'),
            awva=column('awva'),
            delay=column('delay'),
            swva=column('swva'),
            workers=workers,
        )

    @property
    def trials(self) -> int:
        return int(self.awva.size)

    @property
    def awva_failures(self) -> int:
        return int(np.count_nonzero(~np.isfinite(self.awva)))

    @property
    def swva_failures(self) -> int:
        return int(np.count_nonzero(~np.isfinite(self.swva)))

    def _stats(self, values: np.ndarray, failures: int) -> SensitivityStats:
        stats = _finite_stats(values)
        return SensitivityStats(
            mean=stats.mean if stats.count else math.nan,
            std_dev=stats.std_dev,
            trials=self.trials,
            noise_amplitude=self.config.noise_amplitude,
            snr=self.context.snr,
            failures=failures,
        )

    def sensitivity_stats(self) -> SensitivityStats:
        """K in mV/us"""
        return self._stats(self.sensitivity, self.awva_failures)

    def awva_stats(self) -> SensitivityStats:
        return self._stats(self.awva, self.awva_failures)

    def swva_stats(self) -> SensitivityStats:
        return self._stats(self.swva, self.swva_failures)

    def reading(self, name: str) -> AmplitudeReading:
        """Aggregated Max[Theta] reading ('reference_max' or 'shifted_max')"""
        values = getattr(self, name)
        stats = _finite_stats(values)
        if stats.count == 0:
            raise EstimationError(f'no successful {name} readings')
        return AmplitudeReading(max_value=stats.mean, max_time=math.nan, trials=stats.count, std_dev=stats.std_dev)


def collect_trials(config: TrialConfig, trials: int, workers: int = 1) -> TrialBatch:
    """
    Run `trials` Monte Carlo trials and keep every per-trial reading

    Results do not depend on `workers`: each trial draws from its own noise
    streams and outcomes are reassembled in trial order.

    Raises:
        ConfigurationError: trials < 2 or invalid configuration
        DomainError: delta_t == 0
    """
    from awva.tasks.trials import execute_trials

    if trials < 2:
        raise ConfigurationError(f'trials must be >= 2, got {trials!r}')
    context = prepare_context(config)
    outcomes = execute_trials(config, trials, workers)
    batch = TrialBatch.from_outcomes(config, context, outcomes, workers)
    logger.debug(
        f'collected {batch.trials} trials at N_A={config.noise_amplitude!r} V, delta_t={config.delta_t!r} s '
        f'({batch.awva_failures} AWVA / {batch.swva_failures} SWVA failures)'
    )
    return batch


def run_trials(config: TrialConfig, trials: int, workers: int = 1) -> Tuple[SensitivityStats, SensitivityStats]:
    """Mean and population std of (K^A, K^W) over `trials` fresh noise realisations"""
    batch = collect_trials(config, trials, workers)
    return batch.awva_stats(), batch.swva_stats()


def check_failure_fraction(stats: SensitivityStats, max_fraction: float, label: str):
    """
    Raises:
        EstimationFailureThreshold: more than max_fraction of the trials failed
    """
    if stats.trials and stats.failures / stats.trials > max_fraction:
        raise EstimationFailureThreshold(
            f'{label}: {stats.failures} of {stats.trials} trials failed '
            f'(limit {max_fraction:.1%}) at N_A={stats.noise_amplitude!r} V'
        )
