"""
Domain types shared by every simulator module.

All types are frozen dataclasses; traces hold read-only numpy arrays so they
can be passed between threads and worker processes without copying concerns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Tuple

import numpy as np

from awva.errors import ConfigurationError
from awva.utils.validators import (
    as_sample_array,
    validate_finite,
    validate_non_negative,
    validate_open_angle,
    validate_positive,
)

# Pointer shape measured at the reference repetition rate
REFERENCE_FREQUENCY = 200.0
REFERENCE_AMPLITUDE = 0.248
REFERENCE_WIDTH = 3.88e-4
REFERENCE_CENTER = 1.71e-4
REFERENCE_OFFSET = -0.01

# Analog chain defaults (multiplier x integrator, capacitive lag, inverting output)
DEFAULT_GAIN_MULTIPLIER = 1.87
DEFAULT_GAIN_INTEGRATOR = 4470.0
DEFAULT_PHASE_LAG = 7.5e-5
DEFAULT_POLARITY = -1
DEFAULT_MULTIPLIER_LIMIT = 1.0
DEFAULT_INTEGRATOR_LIMIT = 10.0

DEFAULT_SIGMA_FRACTION = 1.0 / 3.0
DEFAULT_SMOOTHER_FRACTION = 0.1
DEFAULT_SCOPE_SPAN_FRACTION = 0.2
# Generator noise bandwidth seen by the analog chain
DEFAULT_NOISE_BANDWIDTH = 5e8
DEFAULT_SAMPLES_PER_PERIOD = 5000
MIN_SAMPLES_PER_PERIOD = 100

SWVA_METHODS = ('smoothed', 'matched', 'edge')


@dataclass(frozen=True)
class WeakMeasurementParams:
    """Pre/post-selected weak measurement of a time delay.

    alpha is the post-selection angle, tau the coupling strength (the delay
    being estimated), omega the pointer spread, t0 the pointer centre and
    I0 the intensity normalisation.
    """

    alpha: float
    tau: float
    omega: float
    t0: float = 0.0
    I0: float = 1.0

    def __post_init__(self):
        validate_open_angle(self.alpha)
        validate_finite('tau', self.tau)
        validate_positive('omega', self.omega)
        validate_finite('t0', self.t0)
        validate_positive('I0', self.I0)
        if not math.isfinite(self.tau / math.tan(self.alpha)):
            raise ConfigurationError('amplified shift tau*cot(alpha) is not finite')


@dataclass(frozen=True)
class PointerParams:
    """Gaussian pointer A*exp[-2((t - t_c)/w)^2] + b repeated at `frequency`"""

    amplitude: float
    width: float
    center: float
    offset: float
    frequency: float

    def __post_init__(self):
        validate_positive('amplitude', self.amplitude)
        validate_positive('width', self.width)
        validate_finite('center', self.center)
        validate_finite('offset', self.offset)
        validate_positive('frequency', self.frequency)
        if self.width >= 1.0 / self.frequency:
            raise ConfigurationError(
                f'pulse width {self.width!r} s does not fit in one period of {self.frequency!r} Hz'
            )

    @property
    def period(self) -> float:
        return 1.0 / self.frequency

    @property
    def spread(self) -> float:
        """Theory spread omega, from exp[-2(u/w)^2] == exp[-u^2/(4 omega^2)]"""
        return self.width / (2.0 * math.sqrt(2.0))

    @classmethod
    def reference(cls, frequency: float = REFERENCE_FREQUENCY) -> 'PointerParams':
        """Measured 200 Hz pointer, rescaled to `frequency` with a fixed duty cycle"""
        base = cls(
            amplitude=REFERENCE_AMPLITUDE,
            width=REFERENCE_WIDTH,
            center=REFERENCE_CENTER,
            offset=REFERENCE_OFFSET,
            frequency=REFERENCE_FREQUENCY,
        )
        return base.scaled_to(frequency)

    def scaled_to(self, frequency: float) -> 'PointerParams':
        """Scale width and centre by (f_old / f_new) so the duty cycle is unchanged"""
        validate_positive('frequency', frequency)
        if frequency == self.frequency:
            return self
        ratio = self.frequency / frequency
        return replace(
            self,
            width=self.width * ratio,
            center=self.center * ratio,
            frequency=frequency,
        )


@dataclass(frozen=True, eq=False)
class SampledTrace:
    """Uniformly sampled voltage record; sample i sits at start_time + i*dt"""

    start_time: float
    dt: float
    samples: np.ndarray

    def __post_init__(self):
        validate_finite('start_time', self.start_time)
        validate_positive('dt', self.dt)
        object.__setattr__(self, 'samples', as_sample_array(self.samples))

    def __len__(self):
        return self.samples.shape[0]

    @property
    def times(self) -> np.ndarray:
        return self.start_time + np.arange(len(self)) * self.dt

    @property
    def duration(self) -> float:
        return len(self) * self.dt

    def with_samples(self, samples) -> 'SampledTrace':
        """Same grid, new values"""
        return SampledTrace(self.start_time, self.dt, samples)


@dataclass(frozen=True, eq=False)
class ThetaTrace:
    """Running product-integral on a uniform grid.

    Values are V^2*s for the ideal integral and volts once the analog chain
    has scaled them. values[0] is the integral up to the first sample.
    """

    start_time: float
    dt: float
    values: np.ndarray

    def __post_init__(self):
        validate_finite('start_time', self.start_time)
        validate_positive('dt', self.dt)
        object.__setattr__(self, 'values', as_sample_array(self.values, 'values'))

    def __len__(self):
        return self.values.shape[0]

    @property
    def times(self) -> np.ndarray:
        return self.start_time + np.arange(len(self)) * self.dt

    @property
    def final(self) -> float:
        return float(self.values[-1])


@dataclass(frozen=True)
class CircuitParams:
    """Behavioural parameters of the multiplier + integrator chain.

    Saturation limits of None disable clipping for that stage.
    """

    gain_multiplier: float = DEFAULT_GAIN_MULTIPLIER
    gain_integrator: float = DEFAULT_GAIN_INTEGRATOR
    phase_lag: float = DEFAULT_PHASE_LAG
    polarity: int = DEFAULT_POLARITY
    multiplier_limit: Optional[float] = DEFAULT_MULTIPLIER_LIMIT
    integrator_limit: Optional[float] = DEFAULT_INTEGRATOR_LIMIT

    def __post_init__(self):
        validate_positive('gain_multiplier', self.gain_multiplier)
        validate_positive('gain_integrator', self.gain_integrator)
        validate_non_negative('phase_lag', self.phase_lag)
        if self.polarity not in (1, -1):
            raise ConfigurationError(f'polarity must be +1 or -1, got {self.polarity!r}')
        if self.multiplier_limit is not None:
            validate_positive('multiplier_limit', self.multiplier_limit)
        if self.integrator_limit is not None:
            validate_positive('integrator_limit', self.integrator_limit)

    @property
    def composite_gain(self) -> float:
        return self.gain_multiplier * self.gain_integrator

    @classmethod
    def identity(cls) -> 'CircuitParams':
        """Unit gains, no lag, no inversion: reproduces the ideal integral"""
        return cls(gain_multiplier=1.0, gain_integrator=1.0, phase_lag=0.0, polarity=1)


@dataclass(frozen=True)
class NoiseSpec:
    """Clipped Gaussian white noise; amplitude is the peak bound N_A.

    bandwidth is the generator noise bandwidth in Hz as seen by the analog
    chain; None means the chain sees exactly the sampled noise.
    """

    amplitude: float
    seed: int
    sigma_fraction: float = DEFAULT_SIGMA_FRACTION
    bandwidth: Optional[float] = None

    def __post_init__(self):
        validate_non_negative('amplitude', self.amplitude)
        if not isinstance(self.seed, (int, np.integer)) or isinstance(self.seed, bool):
            raise ConfigurationError(f'seed must be an integer, got {self.seed!r}')
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigurationError(f'seed must fit in 64 bits, got {self.seed!r}')
        validate_finite('sigma_fraction', self.sigma_fraction)
        if not 0.0 < self.sigma_fraction <= 1.0:
            raise ConfigurationError(f'sigma_fraction must lie in (0, 1], got {self.sigma_fraction!r}')
        if self.bandwidth is not None:
            validate_positive('bandwidth', self.bandwidth)

    @property
    def sigma(self) -> float:
        return self.sigma_fraction * self.amplitude


@dataclass(frozen=True)
class AmplitudeReading:
    """Max[Theta] as read from the scope: signed extremum and where it occurs"""

    max_value: float
    max_time: float
    trials: int = 1
    std_dev: float = 0.0

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigurationError('an amplitude reading needs at least one acquisition')
        validate_non_negative('std_dev', self.std_dev)


@dataclass(frozen=True)
class SensitivityStats:
    """Mean and population std of K (mV/us) or of a normalised K^A / K^W"""

    mean: float
    std_dev: float
    trials: int
    noise_amplitude: float
    snr: float
    failures: int = 0


@dataclass(frozen=True)
class EstimatorOptions:
    """Readout settings for both estimators.

    readout_noise is the std (volts) of the scope's amplitude cursor on each
    Max[Theta] reading. scope_span_fraction is the horizontal span of the
    scope display, as a fraction of the period, used by the 'edge' method.
    """

    swva_method: str = 'smoothed'
    smoother_fraction: float = DEFAULT_SMOOTHER_FRACTION
    readout_noise: float = 0.0
    scope_span_fraction: float = DEFAULT_SCOPE_SPAN_FRACTION

    def __post_init__(self):
        if self.swva_method not in SWVA_METHODS:
            raise ConfigurationError(
                f'swva_method must be one of {", ".join(SWVA_METHODS)}, got {self.swva_method!r}'
            )
        validate_non_negative('smoother_fraction', self.smoother_fraction)
        validate_non_negative('readout_noise', self.readout_noise)
        validate_finite('scope_span_fraction', self.scope_span_fraction)
        if not 0.0 < self.scope_span_fraction <= 1.0:
            raise ConfigurationError(
                f'scope_span_fraction must lie in (0, 1], got {self.scope_span_fraction!r}'
            )


@dataclass(frozen=True)
class TrialConfig:
    """Everything one Monte Carlo batch needs at a single (f, delta_t, N_A) point"""

    pointer: PointerParams
    circuit: CircuitParams
    delta_t: float
    noise_amplitude: float
    sample_rate: float
    base_seed: int = 0
    sigma_fraction: float = DEFAULT_SIGMA_FRACTION
    correlated_noise: bool = False
    estimator: EstimatorOptions = field(default_factory=EstimatorOptions)
    noise_bandwidth: Optional[float] = DEFAULT_NOISE_BANDWIDTH

    def __post_init__(self):
        validate_finite('delta_t', self.delta_t)
        validate_non_negative('noise_amplitude', self.noise_amplitude)
        validate_positive('sample_rate', self.sample_rate)
        if self.sample_rate < MIN_SAMPLES_PER_PERIOD * self.pointer.frequency:
            raise ConfigurationError(
                f'sample_rate {self.sample_rate!r} Hz gives fewer than '
                f'{MIN_SAMPLES_PER_PERIOD} samples per period at {self.pointer.frequency!r} Hz'
            )
        validate_noise_bandwidth(self.noise_bandwidth, self.sample_rate)

    def noise_spec(self, seed: int) -> NoiseSpec:
        return NoiseSpec(
            amplitude=self.noise_amplitude,
            seed=seed,
            sigma_fraction=self.sigma_fraction,
            bandwidth=self.noise_bandwidth,
        )


@dataclass(frozen=True)
class SweepConfig:
    """Declarative sweep definition loaded from a YAML config file"""

    frequencies: Tuple[float, ...]
    delta_ts: Tuple[float, ...]
    noise_amplitudes: Tuple[float, ...]
    trials: int
    base_seed: int
    circuit: CircuitParams
    pointer: PointerParams
    estimator: EstimatorOptions = field(default_factory=EstimatorOptions)
    samples_per_period: int = DEFAULT_SAMPLES_PER_PERIOD
    sample_rate: Optional[float] = None
    sigma_fraction: float = DEFAULT_SIGMA_FRACTION
    correlated_noise: bool = False
    gain_integrator_by_frequency: Tuple[Tuple[float, float], ...] = ()
    max_failure_fraction: float = 0.05
    weak_measurement: Optional[WeakMeasurementParams] = None
    delta_ts_by_frequency: Tuple[Tuple[float, Tuple[float, ...]], ...] = ()
    noise_bandwidth: Optional[float] = DEFAULT_NOISE_BANDWIDTH

    def __post_init__(self):
        for name in ('frequencies', 'delta_ts', 'noise_amplitudes'):
            values = getattr(self, name)
            if not values:
                raise ConfigurationError(f'{name} must not be empty')
        if self.trials < 2:
            raise ConfigurationError(f'trials must be >= 2, got {self.trials!r}')
        if self.samples_per_period < MIN_SAMPLES_PER_PERIOD:
            raise ConfigurationError(
                f'samples_per_period must be >= {MIN_SAMPLES_PER_PERIOD}, got {self.samples_per_period!r}'
            )
        for frequency in self.frequencies:
            validate_positive('frequency', frequency)
            if self.sample_rate is not None and self.sample_rate < MIN_SAMPLES_PER_PERIOD * frequency:
                raise ConfigurationError(
                    f'sample_rate {self.sample_rate!r} Hz is too low for {frequency!r} Hz pointers'
                )
        for amplitude in self.noise_amplitudes:
            validate_non_negative('noise amplitude', amplitude)
        if not 0.0 <= self.max_failure_fraction <= 1.0:
            raise ConfigurationError('max_failure_fraction must lie in [0, 1]')
        for frequency, delta_ts in self.delta_ts_by_frequency:
            if not delta_ts:
                raise ConfigurationError(f'shift list for {frequency!r} Hz must not be empty')
        for frequency in self.frequencies:
            validate_noise_bandwidth(self.noise_bandwidth, self.sample_rate_for(frequency))

    def delta_ts_for(self, frequency: float) -> Tuple[float, ...]:
        """Shifts swept at `frequency`: its own list when configured, else delta_ts"""
        for listed_frequency, delta_ts in self.delta_ts_by_frequency:
            if math.isclose(listed_frequency, frequency):
                return delta_ts
        return self.delta_ts

    def sample_rate_for(self, frequency: float) -> float:
        if self.sample_rate is not None:
            return self.sample_rate
        return self.samples_per_period * frequency

    def pointer_for(self, frequency: float) -> PointerParams:
        return self.pointer.scaled_to(frequency)

    def circuit_for(self, frequency: float) -> CircuitParams:
        """Circuit with the per-frequency integrator calibration, when one is configured"""
        for calibrated_frequency, gain in self.gain_integrator_by_frequency:
            if math.isclose(calibrated_frequency, frequency):
                return replace(self.circuit, gain_integrator=gain)
        return self.circuit

    def trial_config(self, frequency: float, delta_t: float, noise_amplitude: float) -> TrialConfig:
        return TrialConfig(
            pointer=self.pointer_for(frequency),
            circuit=self.circuit_for(frequency),
            delta_t=delta_t,
            noise_amplitude=noise_amplitude,
            sample_rate=self.sample_rate_for(frequency),
            base_seed=self.base_seed,
            sigma_fraction=self.sigma_fraction,
            correlated_noise=self.correlated_noise,
            estimator=self.estimator,
            noise_bandwidth=self.noise_bandwidth,
        )


def validate_noise_bandwidth(bandwidth: Optional[float], sample_rate: float):
    """A finite noise bandwidth must reach the sampling Nyquist frequency"""
    if bandwidth is None:
        return
    validate_positive('noise_bandwidth', bandwidth)
    if 2.0 * bandwidth < sample_rate:
        raise ConfigurationError(
            f'noise bandwidth {bandwidth!r} Hz is below the Nyquist frequency of {sample_rate!r} Hz sampling'
        )


def as_float_tuple(values: Sequence[float]) -> Tuple[float, ...]:
    return tuple(float(v) for v in values)
