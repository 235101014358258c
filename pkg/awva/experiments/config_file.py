"""
YAML sweep definitions.

Every physical key carries its unit as a suffix (`delta_t_us`, `noise_mv`,
`frequencies_hz`); values are converted to SI on load. Unknown keys and
ambiguous duplicates (`width_s` next to `width_us`) are configuration errors.
"""

import logging
import math
from dataclasses import replace
from typing import Any, Dict, Optional

import yaml

from awva.errors import AWVAError, ConfigurationError
from awva.models import (
    DEFAULT_NOISE_BANDWIDTH,
    DEFAULT_SAMPLES_PER_PERIOD,
    DEFAULT_SIGMA_FRACTION,
    REFERENCE_FREQUENCY,
    CircuitParams,
    EstimatorOptions,
    PointerParams,
    SweepConfig,
    WeakMeasurementParams,
    as_float_tuple,
)
from awva.weak_measurement import amplified_shift, pointer_from_theory

logger = logging.getLogger(__name__)

UNITS = {
    'time': {'s': 1.0, 'ms': 1e-3, 'us': 1e-6},
    'voltage': {'v': 1.0, 'mv': 1e-3},
    'frequency': {'hz': 1.0, 'khz': 1e3, 'mhz': 1e6},
    'rate': {'per_s': 1.0},
    'angle': {'rad': 1.0, 'deg': math.pi / 180.0},
}

# base name -> dimension (None: dimensionless, key used as written)
SECTIONS = {
    'pointer': {
        'amplitude': 'voltage',
        'width': 'time',
        'center': 'time',
        'offset': 'voltage',
        'frequency': 'frequency',
    },
    'weak_measurement': {
        'alpha': 'angle',
        'tau': 'time',
        'omega': 'time',
        't0': 'time',
        'i0': None,
    },
    'circuit': {
        'gain_multiplier': None,
        'gain_integrator': 'rate',
        'phase_lag': 'time',
        'polarity': None,
        'multiplier_limit': 'voltage',
        'integrator_limit': 'voltage',
        'gain_integrator_by_frequency': 'rate',
    },
    'noise': {
        'sigma_fraction': None,
        'correlated': None,
        'bandwidth': 'frequency',
    },
    'estimator': {
        'swva_method': None,
        'smoother_fraction': None,
        'readout_noise': 'voltage',
        'scope_span_fraction': None,
    },
    'sweep': {
        'frequencies': 'frequency',
        'delta_t': 'time',
        'delta_t_by_frequency': 'time',
        'noise': 'voltage',
        'trials': None,
        'base_seed': None,
        'samples_per_period': None,
        'sample_rate': 'frequency',
        'max_failure_fraction': None,
    },
}


def _match_key(section: str, key: str):
    """Resolve a raw key to (base name, SI scale)"""
    fields = SECTIONS[section]
    if key in fields and fields[key] is None:
        return key, None
    for base, dimension in fields.items():
        if dimension is None or not key.startswith(base + '_'):
            continue
        suffix = key[len(base) + 1:]
        scale = UNITS[dimension].get(suffix)
        if scale is not None:
            return base, scale
    raise ConfigurationError(f'unknown key {key!r} in section {section!r}')


def _convert(value, scale, where: str):
    if scale is None or value is None:
        return value
    if isinstance(value, dict):
        return {k: _convert(v, scale, where) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_convert(v, scale, where) for v in value]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigurationError(f'{where} must be numeric, got {value!r}')
    return float(value) * scale


def read_section(section: str, raw: Optional[Dict[str, Any]]) -> Dict[str, Any]:
    """
    Convert one section to SI values keyed by base name

    Raises:
        ConfigurationError: unknown key, duplicate quantity or non-numeric value
    """
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ConfigurationError(f'section {section!r} must be a mapping')
    values = {}
    for key, value in raw.items():
        base, scale = _match_key(section, str(key))
        if base in values:
            raise ConfigurationError(f'{base!r} is given twice in section {section!r}')
        values[base] = _convert(value, scale, f'{section}.{key}')
    return values


def _as_list(value):
    if value is None:
        return []
    if isinstance(value, (list, tuple)):
        return list(value)
    return [value]


def _as_int(value, where: str) -> int:
    """Whole numbers only; 1.5 or 'ten' are configuration errors, 1e4 written as 10000.0 is not"""
    if isinstance(value, bool):
        raise ConfigurationError(f'{where} must be an integer, got {value!r}')
    if isinstance(value, int):
        return value
    if isinstance(value, float) and value.is_integer():
        return int(value)
    raise ConfigurationError(f'{where} must be an integer, got {value!r}')


def _build_pointer(pointer: Dict[str, Any], weak: Dict[str, Any], frequency: float):
    if weak:
        shape_keys = set(pointer) - {'frequency'}
        if shape_keys:
            raise ConfigurationError(
                f'pointer shape keys {sorted(shape_keys)} conflict with the weak_measurement section'
            )
        params = WeakMeasurementParams(
            alpha=weak['alpha'],
            tau=weak['tau'],
            omega=weak['omega'],
            t0=weak.get('t0', 0.0),
            I0=weak.get('i0', 1.0),
        )
        return pointer_from_theory(params, frequency), params
    base = PointerParams.reference(frequency)
    overrides = {k: v for k, v in pointer.items() if k != 'frequency'}
    try:
        return replace(base, **overrides), None
    except TypeError as e:
        raise ConfigurationError(f'invalid pointer section: {e}') from e


def _build_circuit(circuit: Dict[str, Any]):
    by_frequency = circuit.pop('gain_integrator_by_frequency', None) or {}
    if not isinstance(by_frequency, dict):
        raise ConfigurationError('gain_integrator_by_frequency_per_s must map frequencies (Hz) to gains')
    calibration = tuple(sorted((float(f), float(g)) for f, g in by_frequency.items()))
    if 'polarity' in circuit:
        circuit['polarity'] = int(circuit['polarity'])
    try:
        return CircuitParams(**circuit), calibration
    except TypeError as e:
        raise ConfigurationError(f'invalid circuit section: {e}') from e


def build_sweep_config(document: Optional[Dict[str, Any]], default_trials: int = 10000,
                       default_max_failure_fraction: float = 0.05) -> SweepConfig:
    """
    Turn a parsed YAML document into a SweepConfig

    Missing sections fall back to the measured reference pointer, the
    default analog chain and noise-free single-shot settings. Without a
    weak_measurement section, sweep.delta_t is required.
    """
    document = document or {}
    if not isinstance(document, dict):
        raise ConfigurationError('config file must contain a mapping at the top level')
    unknown = set(document) - set(SECTIONS)
    if unknown:
        raise ConfigurationError(f'unknown config sections: {", ".join(sorted(unknown))}')

    pointer = read_section('pointer', document.get('pointer'))
    weak = read_section('weak_measurement', document.get('weak_measurement'))
    circuit = read_section('circuit', document.get('circuit'))
    noise = read_section('noise', document.get('noise'))
    estimator = read_section('estimator', document.get('estimator'))
    sweep = read_section('sweep', document.get('sweep'))

    frequencies = _as_list(sweep.get('frequencies'))
    frequency = pointer.get('frequency') or (frequencies[0] if frequencies else REFERENCE_FREQUENCY)
    pointer_params, weak_params = _build_pointer(pointer, weak, frequency)
    circuit_params, calibration = _build_circuit(circuit)

    by_frequency = sweep.get('delta_t_by_frequency') or {}
    if not isinstance(by_frequency, dict):
        raise ConfigurationError('delta_t_by_frequency must map frequencies (Hz) to shift lists')
    delta_ts_by_frequency = tuple(
        (float(f), as_float_tuple(_as_list(shifts))) for f, shifts in sorted(by_frequency.items())
    )

    delta_ts = _as_list(sweep.get('delta_t'))
    if not delta_ts:
        if delta_ts_by_frequency:
            delta_ts = sorted({d for _, shifts in delta_ts_by_frequency for d in shifts})
        elif weak_params is not None:
            delta_ts = [amplified_shift(weak_params.tau, weak_params.alpha)]
        else:
            raise ConfigurationError('sweep.delta_t (e.g. delta_t_us) is required without a weak_measurement section')

    try:
        return SweepConfig(
            frequencies=as_float_tuple(frequencies or [pointer_params.frequency]),
            delta_ts=as_float_tuple(delta_ts),
            noise_amplitudes=as_float_tuple(_as_list(sweep.get('noise')) or [0.0]),
            trials=_as_int(sweep.get('trials', default_trials), 'sweep.trials'),
            base_seed=_as_int(sweep.get('base_seed', 0), 'sweep.base_seed'),
            circuit=circuit_params,
            pointer=pointer_params,
            estimator=EstimatorOptions(**estimator),
            samples_per_period=_as_int(
                sweep.get('samples_per_period', DEFAULT_SAMPLES_PER_PERIOD), 'sweep.samples_per_period'
            ),
            sample_rate=sweep.get('sample_rate'),
            sigma_fraction=float(noise.get('sigma_fraction', DEFAULT_SIGMA_FRACTION)),
            correlated_noise=bool(noise.get('correlated', False)),
            gain_integrator_by_frequency=calibration,
            max_failure_fraction=float(sweep.get('max_failure_fraction', default_max_failure_fraction)),
            weak_measurement=weak_params,
            delta_ts_by_frequency=delta_ts_by_frequency,
            noise_bandwidth=noise.get('bandwidth', DEFAULT_NOISE_BANDWIDTH),
        )
    except AWVAError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigurationError(f'invalid sweep configuration: {e}') from e


def load_sweep_config(path, default_trials: int = 10000, default_max_failure_fraction: float = 0.05) -> SweepConfig:
    """
    Read and validate a sweep YAML file

    Raises:
        ConfigurationError: unreadable file, YAML syntax error or invalid values
    """
    try:
        with open(path, encoding='utf-8') as fh:
            document = yaml.safe_load(fh)
    except (OSError, UnicodeDecodeError) as e:
        raise ConfigurationError(f'cannot read config file {path}: {e}') from e
    except yaml.YAMLError as e:
        raise ConfigurationError(f'{path}: invalid YAML: {e}') from e
    config = build_sweep_config(document, default_trials, default_max_failure_fraction)
    logger.debug(
        f'loaded {path}: {len(config.frequencies)} frequencies, {len(config.delta_ts)} delays, '
        f'{len(config.noise_amplitudes)} noise levels, {config.trials} trials'
    )
    return config
