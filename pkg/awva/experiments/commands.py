"""
Experiment commands behind the CLI.

Each command takes a validated SweepConfig, writes its CSV files into an
output directory and returns a CommandResult. Library exceptions propagate;
the CLI maps them onto exit codes.
"""

import logging
import math
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from awva.circuit_model import apply_circuit, calibrate_phase, integrate_product_with_report
from awva.correlator import cumulative_trapezoid, predicted_attenuation, theta_analytic_trace, theta_numeric
from awva.errors import AWVAError, EstimationFailureThreshold
from awva.estimators import (
    check_failure_fraction,
    collect_trials,
    prepare_context,
    read_amplitude,
    swva_delay_estimate,
)
from awva.experiments.output import ensure_output_dir, write_columns, write_plot_data, write_records
from awva.experiments.scope_csv import ingest_scope_csv, read_scope_columns
from awva.models import CircuitParams, NoiseSpec, SampledTrace, SweepConfig, ThetaTrace, TrialConfig
from awva.noise_harness import (
    STREAM_SHIFTED_I1,
    STREAM_SHIFTED_I2,
    analog_product,
    format_snr,
    noisy_channels,
    snr_db,
    trial_seed,
)
from awva.weak_measurement import render_channels

logger = logging.getLogger(__name__)

MV = 1e3
US = 1e6


@dataclass
class CommandResult:
    files: List[str] = field(default_factory=list)
    summary: Dict[str, object] = field(default_factory=dict)


def relabel_to_grid(observed: ThetaTrace, grid: SampledTrace) -> np.ndarray:
    """
    Place a lagged trace on the input grid by whole-sample relabeling

    Samples before the lag are zero and the tail beyond the grid is dropped.
    """
    lag = (observed.start_time - grid.start_time) / grid.dt
    shift = int(round(lag))
    if not math.isclose(shift, lag, abs_tol=1e-6):
        logger.warning(f'phase lag is {lag:.4f} samples, relabeling by {shift}')
    n = len(grid)
    values = np.zeros(n)
    source = observed.values
    if 0 <= shift < n:
        count = min(n - shift, len(source))
        values[shift:shift + count] = source[:count]
    elif -len(source) < shift < 0:
        count = min(n, len(source) + shift)
        values[:count] = source[-shift:-shift + count]
    return values


def _simulated_channels(config: SweepConfig, frequency: float, delta_t: float, noise_amplitude: float):
    pointer = config.pointer_for(frequency)
    i1, i2 = render_channels(pointer, delta_t, config.sample_rate_for(frequency))
    specs = [
        NoiseSpec(noise_amplitude, trial_seed(config.base_seed, 0, stream), config.sigma_fraction,
                  config.noise_bandwidth)
        for stream in (STREAM_SHIFTED_I1, STREAM_SHIFTED_I2)
    ]
    noisy_i1, noisy_i2 = noisy_channels(i1, i2, *specs, config.correlated_noise)
    product = analog_product(i1, i2, *specs, config.correlated_noise)
    return pointer, i1, i2, noisy_i1, noisy_i2, product


def cmd_simulate(config: SweepConfig, out_dir, shift: Optional[float] = None,
                 noise: Optional[float] = None, plot_data: bool = False) -> CommandResult:
    """
    Single-shot trace dump at the first configured frequency

    Writes waveforms.csv (clean and sampled noisy channels) and theta.csv
    (numeric, analytic, noisy and scope-observed Theta) on a shared time
    column. The noisy Theta columns integrate what the analog chain sees.
    """
    out_dir = ensure_output_dir(out_dir)
    frequency = config.frequencies[0]
    delta_t = config.delta_ts_for(frequency)[0] if shift is None else shift
    noise_amplitude = config.noise_amplitudes[0] if noise is None else noise
    circuit = config.circuit_for(frequency)

    pointer, i1, i2, noisy_i1, noisy_i2, product = _simulated_channels(config, frequency, delta_t, noise_amplitude)
    ideal = theta_numeric(i1, i2)
    analytic = theta_analytic_trace(pointer, delta_t, i1)
    noisy = ThetaTrace(i1.start_time, i1.dt, cumulative_trapezoid(product.samples, product.dt))
    observed, report = integrate_product_with_report(product, circuit)
    if report.saturated:
        logger.warning(
            f'⚠️ circuit saturated ({report.multiplier_clipped} multiplier, '
            f'{report.integrator_clipped} integrator samples clipped)'
        )

    result = CommandResult()
    result.files.append(write_columns(os.path.join(out_dir, 'waveforms.csv'), {
        'time_s': i1.times,
        'i1_v': i1.samples,
        'i2_v': i2.samples,
        'i1_noisy_v': noisy_i1.samples,
        'i2_noisy_v': noisy_i2.samples,
    }))
    observed_on_grid = relabel_to_grid(observed, i1)
    result.files.append(write_columns(os.path.join(out_dir, 'theta.csv'), {
        'time_s': i1.times,
        'theta_v2s': ideal.values,
        'theta_analytic_v2s': analytic.values,
        'theta_noisy_v2s': noisy.values,
        'theta_observed_v': observed_on_grid,
    }))
    if plot_data:
        result.files.append(write_plot_data(os.path.join(out_dir, 'simulate_plot.csv'), {
            'i1': (i1.times, i1.samples),
            'i2': (i2.times, i2.samples),
            'theta': (ideal.times, ideal.values),
            'theta_observed': (i1.times, circuit.polarity * observed_on_grid),
        }))

    signal_peak = float(np.max(np.abs(i1.samples)))
    result.summary = {
        'frequency_hz': frequency,
        'delta_t_us': delta_t * US,
        'noise_mv': noise_amplitude * MV,
        'snr_db': format_snr(snr_db(signal_peak, noise_amplitude)),
        'max_theta_v2s': read_amplitude(ideal).max_value,
        'max_theta_observed_mv': read_amplitude(observed, circuit.polarity).max_value * MV,
    }
    logger.info(f"✅ simulate: {len(i1)} samples written to {out_dir}")
    return result


def _analytic_ratio(trial: TrialConfig, grid: SampledTrace) -> float:
    reference = read_amplitude(theta_analytic_trace(trial.pointer, 0.0, grid)).max_value
    shifted = read_amplitude(theta_analytic_trace(trial.pointer, trial.delta_t, grid)).max_value
    return shifted / reference


def frequency_row(trial: TrialConfig, trials: int, workers: int = 1):
    """
    One frequency-sweep row: amplitude readings, ratios and K at (f, delta_t)

    Noise-free configurations without readout noise are deterministic and
    are evaluated once.

    Returns:
        (record dict, AWVA SensitivityStats or None when deterministic)
    """
    context = prepare_context(trial)
    stats = None
    if trial.noise_amplitude == 0.0 and trial.estimator.readout_noise == 0.0:
        reference_max, reference_std = context.reference_max, 0.0
        shifted_max, shifted_std = context.shifted_max, 0.0
        k_mean, k_std, used, failures = context.k_ref, 0.0, 1, 0
    else:
        batch = collect_trials(trial, trials, workers)
        reference = batch.reading('reference_max')
        shifted = batch.reading('shifted_max')
        reference_max, reference_std = reference.max_value, reference.std_dev
        shifted_max, shifted_std = shifted.max_value, shifted.std_dev
        stats = batch.sensitivity_stats()
        k_mean, k_std, used, failures = stats.mean, stats.std_dev, batch.trials, stats.failures

    record = {
        'frequency_hz': trial.pointer.frequency,
        'delta_t_us': trial.delta_t * US,
        'noise_mv': trial.noise_amplitude * MV,
        'max_theta_ref_mv': reference_max * MV,
        'max_theta_ref_std_mv': reference_std * MV,
        'max_theta_shifted_mv': shifted_max * MV,
        'max_theta_shifted_std_mv': shifted_std * MV,
        'amplitude_ratio': shifted_max / reference_max,
        'analytic_ratio': _analytic_ratio(trial, context.reference),
        'gaussian_ratio': predicted_attenuation(trial.pointer, trial.delta_t),
        'k_mv_per_us': k_mean,
        'k_std_mv_per_us': k_std,
        'trials': used,
        'failures': failures,
    }
    return record, stats


def cmd_sweep_frequency(config: SweepConfig, out_dir, workers: int = 1, plot_data: bool = False) -> CommandResult:
    """
    Sweep over every (f, delta_t) pair at the first noise level

    Raises:
        EstimationFailureThreshold: after writing, if a row failed too often
    """
    out_dir = ensure_output_dir(out_dir)
    noise_amplitude = config.noise_amplitudes[0]
    records = []
    failed = []
    for frequency in config.frequencies:
        for delta_t in config.delta_ts_for(frequency):
            trial = config.trial_config(frequency, delta_t, noise_amplitude)
            record, stats = frequency_row(trial, config.trials, workers)
            records.append(record)
            logger.info(
                f"f={frequency:g} Hz, delta_t={delta_t * US:g} us: "
                f"ratio={record['amplitude_ratio']:.6f}, K={record['k_mv_per_us']:.4e} mV/us"
            )
            if stats is not None:
                try:
                    check_failure_fraction(stats, config.max_failure_fraction, f'f={frequency:g} Hz AWVA')
                except EstimationFailureThreshold as e:
                    failed.append(e)

    result = CommandResult()
    result.files.append(write_records(os.path.join(out_dir, 'sweep_frequency.csv'), records))
    if plot_data:
        curves = {}
        for frequency in config.frequencies:
            rows = [r for r in records if r['frequency_hz'] == frequency]
            curves[f'K f={frequency:g}Hz'] = ([r['delta_t_us'] for r in rows], [r['k_mv_per_us'] for r in rows])
        result.files.append(write_plot_data(os.path.join(out_dir, 'sweep_frequency_plot.csv'), curves))
    result.summary = {'rows': len(records)}
    logger.info(f"✅ sweep-frequency: {len(records)} rows written to {out_dir}")
    if failed:
        raise failed[0]
    return result


def awva_wins(record: Dict[str, object]) -> bool:
    """AWVA has both the smaller spread and the smaller bias in this row"""
    ka_std, kw_std = record['ka_std'], record['kw_std']
    ka_bias = abs(record['ka_mean'] - 1.0)
    kw_bias = abs(record['kw_mean'] - 1.0)
    return bool(ka_std < kw_std and ka_bias < kw_bias)


def advantage_band(records: Sequence[Dict[str, object]]) -> Optional[Tuple[float, float]]:
    """
    Widest contiguous noise band (in mV) where AWVA beats SWVA

    Rows are ordered by noise_mv; ties between equally long runs go to the
    lower-noise band.
    """
    ordered = sorted(records, key=lambda r: r['noise_mv'])
    best = None
    run_start = None
    for index, record in enumerate(ordered + [None]):
        winning = record is not None and awva_wins(record)
        if winning and run_start is None:
            run_start = index
        elif not winning and run_start is not None:
            length = index - run_start
            if best is None or length > best[1] - best[0] + 1:
                best = (run_start, index - 1)
            run_start = None
    if best is None:
        return None
    return ordered[best[0]]['noise_mv'], ordered[best[1]]['noise_mv']


def noise_row(trial: TrialConfig, trials: int, workers: int = 1):
    """One noise-sweep row plus the stats used for the failure check"""
    batch = collect_trials(trial, trials, workers)
    awva = batch.awva_stats()
    swva = batch.swva_stats()
    k = batch.sensitivity_stats()
    record = {
        'frequency_hz': trial.pointer.frequency,
        'delta_t_us': trial.delta_t * US,
        'noise_mv': trial.noise_amplitude * MV,
        'snr_db': batch.context.snr,
        'kw_mean': swva.mean,
        'kw_std': swva.std_dev,
        'ka_mean': awva.mean,
        'ka_std': awva.std_dev,
        'k_mean_mv_per_us': k.mean,
        'k_std_mv_per_us': k.std_dev,
        'k_ref_mv_per_us': batch.context.k_ref,
        'trials': batch.trials,
        'swva_failures': swva.failures,
        'awva_failures': awva.failures,
    }
    return record, awva, swva


def cmd_sweep_noise(config: SweepConfig, out_dir, workers: int = 1, plot_data: bool = False) -> CommandResult:
    """
    Sweep over the noise amplitudes for every (f, delta_t)

    Each row reports K^W and K^A mean +- population std, the failure counts
    and whether the row lies in the band where AWVA beats SWVA.

    Raises:
        EstimationFailureThreshold: after writing, if a row failed too often
    """
    out_dir = ensure_output_dir(out_dir)
    records = []
    bands = {}
    failed = []
    for frequency in config.frequencies:
        for delta_t in config.delta_ts_for(frequency):
            group = []
            for noise_amplitude in config.noise_amplitudes:
                trial = config.trial_config(frequency, delta_t, noise_amplitude)
                record, awva, swva = noise_row(trial, config.trials, workers)
                record['awva_advantage'] = awva_wins(record)
                group.append(record)
                logger.info(
                    f"N_A={noise_amplitude * MV:g} mV (SNR {format_snr(record['snr_db'])} dB): "
                    f"K^W={swva.mean:.3f}±{swva.std_dev:.3f}, K^A={awva.mean:.3f}±{awva.std_dev:.3f}"
                )
                for stats, label in ((awva, 'AWVA'), (swva, 'SWVA')):
                    try:
                        check_failure_fraction(stats, config.max_failure_fraction, label)
                    except EstimationFailureThreshold as e:
                        failed.append(e)

            band = advantage_band(group)
            bands[(frequency, delta_t)] = band
            for record in group:
                record['in_advantage_band'] = band is not None and band[0] <= record['noise_mv'] <= band[1]
            if band is None:
                logger.info(f'f={frequency:g} Hz, delta_t={delta_t * US:g} us: no noise band where AWVA beats SWVA')
            else:
                logger.info(
                    f'f={frequency:g} Hz, delta_t={delta_t * US:g} us: AWVA beats SWVA '
                    f'for {band[0]:g} mV <= N_A <= {band[1]:g} mV'
                )
            records.extend(group)

    result = CommandResult()
    result.files.append(write_records(os.path.join(out_dir, 'sweep_noise.csv'), records))
    if plot_data:
        noise = [r['noise_mv'] for r in records]
        result.files.append(write_plot_data(os.path.join(out_dir, 'sweep_noise_plot.csv'), {
            'K^A mean': (noise, [r['ka_mean'] for r in records]),
            'K^A std': (noise, [r['ka_std'] for r in records]),
            'K^W mean': (noise, [r['kw_mean'] for r in records]),
            'K^W std': (noise, [r['kw_std'] for r in records]),
        }))
    result.summary = {'rows': len(records), 'bands': bands}
    logger.info(f"✅ sweep-noise: {len(records)} rows written to {out_dir}")
    if failed:
        raise failed[0]
    return result


def cmd_calibrate_phase(config: SweepConfig, out_dir, scope=None, observed=None,
                        channels: Optional[Sequence[str]] = None, theta_column: str = 'theta_observed_v',
                        fit_gain: bool = False) -> CommandResult:
    """
    Recover t_phi from a scope-observed Theta

    Channels come from `scope` (a waveform CSV) or are simulated from the
    config; the observed Theta comes from `observed` (a CSV column) or from
    the modeled circuit, shown on the input grid as a scope would.
    """
    out_dir = ensure_output_dir(out_dir)
    frequency = config.frequencies[0]
    circuit = config.circuit_for(frequency)

    if scope is not None:
        i1, i2 = ingest_scope_csv(scope, channels)
    else:
        _, _, _, i1, i2, _ = _simulated_channels(
            config, frequency, config.delta_ts_for(frequency)[0], config.noise_amplitudes[0]
        )
    ideal = theta_numeric(i1, i2)

    if observed is not None:
        column = read_scope_columns(observed, [theta_column])[theta_column]
        observed_trace = ThetaTrace(column.start_time, column.dt, column.samples)
    else:
        lagged = apply_circuit(i1, i2, circuit)
        observed_trace = ThetaTrace(i1.start_time, i1.dt, relabel_to_grid(lagged, i1))

    lag = calibrate_phase(observed_trace, ideal, None if fit_gain else circuit)
    record = {
        'frequency_hz': frequency,
        'phase_lag_us': lag * US,
        'configured_phase_lag_us': circuit.phase_lag * US,
        'error_us': (lag - circuit.phase_lag) * US,
        'dt_us': ideal.dt * US,
        'gain_fitted': fit_gain,
    }
    result = CommandResult(files=[write_records(os.path.join(out_dir, 'calibration.csv'), [record])], summary=record)
    logger.info(f"✅ calibrate-phase: t_phi = {lag * US:.3f} us")
    return result


def cmd_ingest(scope, out_dir, config: Optional[SweepConfig] = None,
               channels: Optional[Sequence[str]] = None, plot_data: bool = False) -> CommandResult:
    """
    Push a real scope export through the correlator and the circuit model

    Writes ingest_theta.csv. With a config, the SWVA delay of the first
    channel against the configured pointer is reported as well.
    """
    out_dir = ensure_output_dir(out_dir)
    i1, i2 = ingest_scope_csv(scope, channels)
    circuit = config.circuit_for(config.frequencies[0]) if config is not None else CircuitParams()
    ideal = theta_numeric(i1, i2)
    observed = relabel_to_grid(apply_circuit(i1, i2, circuit), i1)

    result = CommandResult()
    result.files.append(write_columns(os.path.join(out_dir, 'ingest_theta.csv'), {
        'time_s': i1.times,
        'theta_v2s': ideal.values,
        'theta_observed_v': observed,
    }))
    if plot_data:
        result.files.append(write_plot_data(os.path.join(out_dir, 'ingest_plot.csv'), {
            'theta': (ideal.times, ideal.values),
        }))

    reading = read_amplitude(ideal)
    summary = {
        'samples': len(i1),
        'dt_s': i1.dt,
        'max_theta_v2s': reading.max_value,
        'max_time_s': reading.max_time,
    }
    if config is not None:
        template = config.pointer_for(config.frequencies[0])
        try:
            summary['swva_delay_us'] = swva_delay_estimate(
                i1, template, config.estimator.swva_method, config.estimator.smoother_fraction
            ) * US
        except AWVAError as e:
            logger.warning(f'⚠️ SWVA delay not available for {scope}: {e}')
    result.summary = summary
    logger.info(f"✅ ingest: {len(i1)} samples from {scope}")
    return result
