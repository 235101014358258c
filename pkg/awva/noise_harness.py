"""
Seeded Gaussian white noise injection and the SNR metric.

Noise samples are i.i.d. normal with sigma = sigma_fraction * N_A, clipped to
[-N_A, +N_A] so that N_A is the peak bound used in the SNR formula. Each
NoiseSpec seed keys a Philox counter-based stream, so trial seeds derived
from a base seed give independent, order-free realisations.

The scope sees the noise at its sample instants. The analog multiplier and
integrator see the generator noise over its full bandwidth, so with a
NoiseSpec bandwidth the chain integrates interval averages instead of the
sampled values; that part is drawn from a separate stream of the same seed.
"""

import logging
import math

import numpy as np
from scipy.stats import norm

from awva.circuit_model import integrate_product
from awva.errors import ConfigurationError, DomainError
from awva.models import CircuitParams, NoiseSpec, SampledTrace, ThetaTrace
from awva.utils.validators import validate_same_grid

logger = logging.getLogger(__name__)

SEED_MASK = (1 << 64) - 1
STREAMS_PER_TRIAL = 4

# Stream indices inside one trial
STREAM_REFERENCE_A = 0
STREAM_REFERENCE_B = 1
STREAM_SHIFTED_I1 = 2
STREAM_SHIFTED_I2 = 3


def trial_seed(base_seed: int, trial_index: int, stream: int) -> int:
    """Distinct 64-bit key for every (trial, stream) pair of a run"""
    if not 0 <= stream < STREAMS_PER_TRIAL:
        raise ConfigurationError(f'stream must lie in [0, {STREAMS_PER_TRIAL}), got {stream!r}')
    return ((int(base_seed) + int(trial_index)) * STREAMS_PER_TRIAL + stream) & SEED_MASK


def noise_generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed)))


def readout_generator(base_seed: int, trial_index: int) -> np.random.Generator:
    """Scope readout jitter stream; keys above 2^64 never collide with channel noise"""
    key = trial_seed(base_seed, trial_index, STREAM_REFERENCE_A) | (1 << 64)
    return np.random.Generator(np.random.Philox(key=key))


def gen_noise(grid: SampledTrace, spec: NoiseSpec) -> SampledTrace:
    """
    Clipped Gaussian white noise on the grid of `grid`

    Args:
        grid: Any trace; only its start time, spacing and length are used
        spec: Amplitude, seed and sigma fraction

    Returns:
        Noise trace, bit-identical for a fixed (seed, length)
    """
    count = len(grid)
    if spec.amplitude == 0.0:
        return grid.with_samples(np.zeros(count))
    draws = noise_generator(spec.seed).normal(0.0, spec.sigma, count)
    return grid.with_samples(np.clip(draws, -spec.amplitude, spec.amplitude))


def snr_db(signal_peak: float, noise_peak: float) -> float:
    """
    20*log10(signal peak / noise peak)

    A zero noise peak returns +inf (noise-free), a zero signal peak -inf.

    Raises:
        DomainError: a negative or non-finite peak
    """
    for name, value in (('signal_peak', signal_peak), ('noise_peak', noise_peak)):
        if value is None or math.isnan(value) or value < 0:
            raise DomainError(f'{name} must be >= 0, got {value!r}')
    if noise_peak == 0.0:
        return math.inf
    if signal_peak == 0.0:
        return -math.inf
    return 20.0 * math.log10(signal_peak / noise_peak)


def format_snr(value: float) -> str:
    if value == math.inf:
        return 'noise-free'
    if value == -math.inf:
        return 'no-signal'
    return f'{value:.2f}'


def add_noise(trace: SampledTrace, noise: SampledTrace) -> SampledTrace:
    validate_same_grid(trace, noise)
    return trace.with_samples(trace.samples + noise.samples)


def noisy_channels(i1: SampledTrace, i2: SampledTrace, spec1: NoiseSpec, spec2: NoiseSpec,
                   correlated: bool = False):
    """
    Both channels with their injected noise, as the scope samples them.

    With correlated=True the first spec's realisation is added to both
    channels; otherwise the two seeds must differ.

    Raises:
        ConfigurationError: identical seeds without correlated=True
    """
    validate_same_grid(i1, i2)
    if correlated:
        shared = gen_noise(i1, spec1)
        return add_noise(i1, shared), add_noise(i2, shared)
    _check_distinct_seeds(spec1, spec2)
    return add_noise(i1, gen_noise(i1, spec1)), add_noise(i2, gen_noise(i2, spec2))


def _check_distinct_seeds(spec1: NoiseSpec, spec2: NoiseSpec):
    if spec1.seed == spec2.seed:
        raise ConfigurationError(
            'both channels use the same noise seed; that injects fully correlated noise '
            '(enable correlated noise explicitly if this is intended)'
        )


def clipped_moments(sigma_fraction: float):
    """
    Second and fourth moment of a unit normal clipped at +-1/sigma_fraction

    Multiply by sigma^2 and sigma^4 for the moments of the injected noise.
    """
    c = 1.0 / sigma_fraction
    tail = float(norm.sf(c))
    density = float(norm.pdf(c))
    second = 1.0 - 2.0 * tail - 2.0 * c * density + 2.0 * c ** 2 * tail
    fourth = 3.0 * (1.0 - 2.0 * tail) - 2.0 * (c ** 3 + 3.0 * c) * density + 2.0 * c ** 4 * tail
    return second, fourth


def band_generator(seed: int) -> np.random.Generator:
    """Analog-path stream of a noise source; keys above 2^65 never collide with sampled noise"""
    return np.random.Generator(np.random.Philox(key=int(seed) | (2 << 64)))


def _draw(generator: np.random.Generator, scale: float, count: int) -> np.ndarray:
    if scale == 0.0:
        return np.zeros(count)
    return generator.normal(0.0, scale, count)


def band_limited_product(i1: SampledTrace, i2: SampledTrace, spec1: NoiseSpec, spec2: NoiseSpec,
                         correlated: bool = False) -> SampledTrace:
    """
    Multiplier input x*y averaged over each sample interval.

    The generator noise has `bandwidth` B, far above the sample rate, so an
    interval of length dt holds 2*B*dt independent noise values. The chain
    integrates all of them; per interval it sees the signal product plus the
    interval means of s1*N2, s2*N1 and N1*N2, drawn here as Gaussians with
    the exact clipped-noise variances.

    Raises:
        ConfigurationError: missing or mismatched bandwidths, identical seeds
            without correlated=True, bandwidth below the sampling Nyquist
        AlignmentError: the channels are on different grids
    """
    validate_same_grid(i1, i2)
    if spec1.bandwidth is None or spec1.bandwidth != spec2.bandwidth:
        raise ConfigurationError(
            f'band-limited product needs one bandwidth on both channels, got '
            f'{spec1.bandwidth!r} and {spec2.bandwidth!r}'
        )
    count = len(i1)
    per_interval = 2.0 * spec1.bandwidth * i1.dt
    if per_interval < 1.0:
        raise ConfigurationError(
            f'noise bandwidth {spec1.bandwidth!r} Hz is below the Nyquist frequency of dt={i1.dt!r} s'
        )
    root = math.sqrt(per_interval)
    x = i1.samples
    y = i2.samples

    if correlated:
        second, fourth = clipped_moments(spec1.sigma_fraction)
        sigma = spec1.sigma
        generator = band_generator(spec1.seed)
        mean1 = _draw(generator, sigma * math.sqrt(second) / root, count)
        square = sigma ** 2 * second + _draw(generator, sigma ** 2 * math.sqrt(fourth - second ** 2) / root, count)
        return i1.with_samples(x * y + x * mean1 + y * mean1 + square)

    _check_distinct_seeds(spec1, spec2)
    spread1 = spec1.sigma * math.sqrt(clipped_moments(spec1.sigma_fraction)[0])
    spread2 = spec2.sigma * math.sqrt(clipped_moments(spec2.sigma_fraction)[0])
    mean1 = _draw(band_generator(spec1.seed), spread1 / root, count)
    generator2 = band_generator(spec2.seed)
    mean2 = _draw(generator2, spread2 / root, count)
    cross = _draw(generator2, spread1 * spread2 / root, count)
    return i1.with_samples(x * y + x * mean2 + y * mean1 + cross)


def analog_product(i1: SampledTrace, i2: SampledTrace, spec1: NoiseSpec, spec2: NoiseSpec,
                   correlated: bool = False) -> SampledTrace:
    """Multiplier input of the noisy chain: sampled noise without a bandwidth, band-limited with one"""
    if spec1.bandwidth is None and spec2.bandwidth is None:
        noisy_i1, noisy_i2 = noisy_channels(i1, i2, spec1, spec2, correlated)
        return noisy_i1.with_samples(noisy_i1.samples * noisy_i2.samples)
    return band_limited_product(i1, i2, spec1, spec2, correlated)


def theta_with_noise(i1: SampledTrace, i2: SampledTrace, spec1: NoiseSpec, spec2: NoiseSpec,
                     circuit: CircuitParams, correlated: bool = False) -> ThetaTrace:
    """
    Observed Theta_IN = chain response to (I1 + N) and (I2 + N')

    Without a noise bandwidth the chain integrates the sampled noise, which
    is bit-identical to apply_circuit over noisy_channels.

    Raises:
        ConfigurationError: identical seeds without correlated=True
        AlignmentError: the channels are on different grids
    """
    return integrate_product(analog_product(i1, i2, spec1, spec2, correlated), circuit)
