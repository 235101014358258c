"""
Tests for the AWVA/SWVA readouts and the Monte Carlo harness
"""

import math
import os
from pathlib import Path

import numpy as np
import pytest

from awva.circuit_model import apply_circuit, calibrate_phase
from awva.correlator import predicted_attenuation, theta_numeric
from awva.errors import (
    ConfigurationError,
    DomainError,
    EstimationError,
    EstimationFailureThreshold,
)
from awva.estimators import (
    RunningStats,
    TrialBatch,
    TrialOutcome,
    aggregate_readings,
    check_failure_fraction,
    collect_trials,
    normalize_awva,
    normalize_swva,
    prepare_context,
    read_amplitude,
    run_trial_range,
    run_trials,
    sensitivity_K,
    swva_delay_estimate,
)
from awva.experiments.config_file import load_sweep_config
from awva.models import (
    AmplitudeReading,
    CircuitParams,
    EstimatorOptions,
    PointerParams,
    SampledTrace,
    SensitivityStats,
    ThetaTrace,
    TrialConfig,
)
from awva.noise_harness import snr_db
from awva.tasks.trials import execute_trials, split_chunks
from awva.weak_measurement import render_channels, render_period

SWEEPS = Path(__file__).parent / 'sweeps'


@pytest.mark.parametrize('reference, shifted, delta_t, expected', [
    (76.797e-3, 72.278e-3, 100e-6, 4.519e-2),
    (76.797e-3, 75.978e-3, 50e-6, 1.638e-2),
])
def test_sensitivity_from_tabulated_amplitudes(reference, shifted, delta_t, expected):
    assert sensitivity_K(reference, shifted, delta_t) == pytest.approx(expected, rel=1e-6)


def test_sensitivity_rejects_zero_shift():
    with pytest.raises(DomainError):
        sensitivity_K(0.1, 0.09, 0.0)


def test_normalizers():
    assert normalize_awva(1.208e-2, 1.208e-2) == 1.0
    assert normalize_awva(-0.5, 0.25) == -2.0
    assert normalize_swva(5e-5, 5e-5) == 1.0
    assert normalize_swva(-2.5e-5, 5e-5) == -0.5
    with pytest.raises(DomainError):
        normalize_awva(1.0, 0.0)
    with pytest.raises(DomainError):
        normalize_swva(1e-5, 0.0)


def test_read_amplitude_follows_polarity(channels, circuit):
    observed = apply_circuit(*channels, circuit)
    assert observed.values.min() < 0
    reading = read_amplitude(observed, circuit.polarity)
    assert reading.max_value == pytest.approx(-observed.values.min())
    assert reading.max_time == pytest.approx(observed.times[int(np.argmin(observed.values))])


def test_read_amplitude_window():
    theta = ThetaTrace(0.0, 1.0, [0.0, 1.0, 5.0, 2.0, -7.0])
    assert read_amplitude(theta).max_value == -7.0
    assert read_amplitude(theta, window=(0.0, 3.0)).max_value == 5.0
    assert read_amplitude(theta, window=(1.5, 2.5)).max_time == 2.0
    with pytest.raises(EstimationError):
        read_amplitude(theta, window=(10.0, 11.0))


def test_read_amplitude_rejects_zero_trace():
    with pytest.raises(EstimationError):
        read_amplitude(ThetaTrace(0.0, 1e-6, np.zeros(10)))


def test_aggregate_readings_population_std():
    readings = [AmplitudeReading(v, 1e-3) for v in (1.0, 2.0, 3.0, 4.0)]
    total = aggregate_readings(readings)
    assert total.max_value == pytest.approx(2.5)
    assert total.std_dev == pytest.approx(math.sqrt(1.25))
    assert total.trials == 4
    with pytest.raises(ConfigurationError):
        aggregate_readings([])


@pytest.mark.parametrize('method', ['smoothed', 'matched', 'edge'])
def test_swva_noise_free_delay(pointer, method):
    shifted, _ = render_channels(pointer, 5e-5, 1e6)
    delay = swva_delay_estimate(shifted, pointer, method)
    assert delay == pytest.approx(5e-5, abs=shifted.dt)


@pytest.mark.parametrize('method', ['smoothed', 'matched'])
def test_swva_delay_wraps_into_half_period(pointer, method):
    """A 3 ms shift at 200 Hz reads as -2 ms"""
    shifted = render_period(pointer, 3e-3, 1e6)
    delay = swva_delay_estimate(shifted, pointer, method)
    assert delay == pytest.approx(-2e-3, abs=shifted.dt)


def test_swva_raw_argmax(pointer):
    shifted = render_period(pointer, 1e-4, 1e6)
    assert swva_delay_estimate(shifted, pointer, smoother_fraction=0.0) == pytest.approx(1e-4, abs=1e-6)


def test_swva_rejects_bad_input(pointer):
    shifted = render_period(pointer, 5e-5, 1e6)
    with pytest.raises(ConfigurationError):
        swva_delay_estimate(shifted, pointer, method='argmin')
    short = SampledTrace(0.0, 1e-6, shifted.samples[:1000])
    with pytest.raises(ConfigurationError):
        swva_delay_estimate(short, pointer)
    flat = shifted.with_samples(np.zeros(len(shifted)))
    for method in ('smoothed', 'matched', 'edge'):
        with pytest.raises(EstimationError):
            swva_delay_estimate(flat, pointer, method)


def test_edge_reads_a_fractional_shift(pointer):
    shifted, _ = render_channels(pointer, 7.3e-6, 1e6)
    delay = swva_delay_estimate(shifted, pointer, 'edge')
    assert delay == pytest.approx(7.3e-6, abs=0.1 * shifted.dt)


def test_edge_is_exact_for_whole_sample_shifts(pointer):
    shifted, _ = render_channels(pointer, 5e-5, 1e6)
    assert swva_delay_estimate(shifted, pointer, 'edge') == pytest.approx(5e-5, abs=shifted.dt / 100)


def test_edge_rejects_an_unreachable_screen(pointer):
    shifted = render_period(pointer, 4e-4, 1e6)
    with pytest.raises(EstimationError):
        swva_delay_estimate(shifted, pointer, 'edge', scope_span_fraction=0.01)


def test_edge_jitter_stays_small_at_low_noise(trial_config):
    config = trial_config(noise_amplitude=0.02, base_seed=9, estimator=EstimatorOptions(swva_method='edge'))
    _, swva = run_trials(config, trials=50)
    assert swva.mean == pytest.approx(1.0, abs=0.1)
    assert swva.std_dev < 0.2


def test_edge_triggers_early_at_high_noise(trial_config):
    """False crossings ahead of the pulse drag the mean below zero"""
    config = trial_config(noise_amplitude=2.0, base_seed=9, estimator=EstimatorOptions(swva_method='edge'))
    _, swva = run_trials(config, trials=40)
    assert swva.mean < 0


def test_band_limited_awva_spread_does_not_depend_on_sampling(trial_config):
    fine, _ = run_trials(trial_config(noise_amplitude=1.0, sample_rate=1e6, base_seed=4), trials=400)
    coarse, _ = run_trials(trial_config(noise_amplitude=1.0, sample_rate=2e5, base_seed=4), trials=400)
    assert 0.75 < fine.std_dev / coarse.std_dev < 1.33


def test_sampled_noise_path_inflates_the_awva_spread(trial_config):
    band, _ = run_trials(trial_config(noise_amplitude=1.0, base_seed=4), trials=200)
    sampled, _ = run_trials(trial_config(noise_amplitude=1.0, base_seed=4, noise_bandwidth=None), trials=200)
    assert sampled.std_dev > 1.5 * band.std_dev


def test_k_is_unchanged_by_the_phase_lag(pointer):
    """Calibrated relabeling removes t_phi from Max[Theta] and from K"""
    shifted, reference = render_channels(pointer, 5e-5, 1e6)
    ideal = theta_numeric(shifted, reference)
    readings = {}
    for lag in (0.0, 75e-6):
        circuit = CircuitParams(phase_lag=lag)
        observed_shifted = apply_circuit(shifted, reference, circuit)
        observed_reference = apply_circuit(reference, reference, circuit)
        recovered = calibrate_phase(observed_shifted, ideal, circuit)
        assert recovered == pytest.approx(lag, abs=shifted.dt)
        shifted_max = read_amplitude(
            ThetaTrace(observed_shifted.start_time - recovered, shifted.dt, observed_shifted.values),
            circuit.polarity,
        )
        reference_max = read_amplitude(
            ThetaTrace(observed_reference.start_time - recovered, reference.dt, observed_reference.values),
            circuit.polarity,
        )
        readings[lag] = (
            sensitivity_K(reference_max.max_value, shifted_max.max_value, 5e-5),
            shifted_max.max_time,
        )
    assert readings[75e-6][0] == readings[0.0][0]
    assert readings[75e-6][1] == pytest.approx(readings[0.0][1], abs=1e-9)


def test_context_k_is_unchanged_by_the_phase_lag(pointer):
    contexts = [
        prepare_context(TrialConfig(pointer, CircuitParams(phase_lag=lag), 5e-5, 0.0, 2e5))
        for lag in (0.0, 75e-6)
    ]
    assert contexts[0].k_ref == contexts[1].k_ref


def test_running_stats_match_numpy(rng):
    values = rng.normal(3.0, 2.0, 1000)
    stats = RunningStats().extend(values)
    assert stats.count == 1000
    assert stats.mean == pytest.approx(np.mean(values), rel=1e-12)
    assert stats.variance == pytest.approx(np.var(values), rel=1e-10)


def test_running_stats_merge_is_exact(rng):
    values = rng.normal(0.0, 1.0, 777)
    left = RunningStats().extend(values[:300])
    right = RunningStats().extend(values[300:])
    merged = left.merge(right)
    assert merged.count == 777
    assert merged.mean == pytest.approx(np.mean(values), rel=1e-12, abs=1e-15)
    assert merged.std_dev == pytest.approx(np.std(values), rel=1e-10)
    assert RunningStats().merge(left).mean == left.mean
    assert left.merge(RunningStats()).m2 == left.m2


def test_empty_running_stats():
    assert math.isnan(RunningStats().variance)


def test_check_failure_fraction():
    ok = SensitivityStats(mean=1.0, std_dev=0.1, trials=100, noise_amplitude=0.5, snr=-6.0, failures=5)
    check_failure_fraction(ok, 0.05, 'AWVA')
    bad = SensitivityStats(mean=1.0, std_dev=0.1, trials=100, noise_amplitude=0.5, snr=-6.0, failures=6)
    with pytest.raises(EstimationFailureThreshold):
        check_failure_fraction(bad, 0.05, 'AWVA')


def test_context_reference_values(trial_config):
    config = trial_config()
    context = prepare_context(config)
    assert context.reference_max > context.shifted_max > 0
    assert context.k_ref > 0
    assert context.snr == math.inf
    noisy = prepare_context(trial_config(noise_amplitude=1.0))
    assert noisy.snr == pytest.approx(snr_db(0.238, 1.0), abs=0.05)


def test_context_rejects_zero_shift(trial_config):
    with pytest.raises(DomainError):
        prepare_context(trial_config(delta_t=0.0))


def test_k_increases_with_shift(trial_config):
    small = prepare_context(trial_config(delta_t=5e-5))
    large = prepare_context(trial_config(delta_t=1e-4))
    assert large.k_ref > small.k_ref


@pytest.mark.parametrize('frequency, delta_t', [(200.0, 5e-5), (2000.0, 5e-6), (20000.0, 5e-7)])
def test_noise_free_amplitude_ratio_matches_prediction(frequency, delta_t):
    """Offset-free pulses, 5000 samples per period"""
    reference = PointerParams.reference(frequency)
    bare = PointerParams(reference.amplitude, reference.width, reference.center, 0.0, frequency)
    config = TrialConfig(
        pointer=bare,
        circuit=CircuitParams(),
        delta_t=delta_t,
        noise_amplitude=0.0,
        sample_rate=5000 * frequency,
    )
    context = prepare_context(config)
    ratio = context.shifted_max / context.reference_max
    assert ratio == pytest.approx(predicted_attenuation(bare, delta_t), rel=1e-3)


def test_noise_free_reading_equals_chain_output(trial_config):
    config = trial_config()
    context = prepare_context(config)
    observed = apply_circuit(context.shifted, context.reference, config.circuit)
    assert context.shifted_max == pytest.approx(
        config.circuit.composite_gain * theta_numeric(context.shifted, context.reference).values.max(),
        rel=1e-12,
    )
    assert context.shifted_max == pytest.approx(-observed.values.min())


def test_noise_free_trials_recover_unity(trial_config):
    awva, swva = run_trials(trial_config(), trials=4)
    assert awva.mean == 1.0
    assert awva.std_dev == 0.0
    assert awva.failures == 0
    assert swva.mean == pytest.approx(1.0, abs=0.1)
    assert swva.std_dev == 0.0
    assert awva.snr == math.inf


def test_matched_method_is_exact_without_noise(trial_config):
    config = trial_config(estimator=EstimatorOptions(swva_method='matched'))
    _, swva = run_trials(config, trials=2)
    assert swva.mean == pytest.approx(1.0, abs=0.02)


def test_trials_need_at_least_two(trial_config):
    with pytest.raises(ConfigurationError):
        collect_trials(trial_config(), trials=1)


def test_trials_are_deterministic(trial_config):
    config = trial_config(noise_amplitude=0.2, base_seed=7)
    first = collect_trials(config, trials=5)
    second = collect_trials(config, trials=5)
    np.testing.assert_array_equal(first.awva, second.awva)
    np.testing.assert_array_equal(first.swva, second.swva)


def test_results_do_not_depend_on_worker_count(trial_config):
    config = trial_config(noise_amplitude=0.2, base_seed=7)
    single = collect_trials(config, trials=6, workers=1)
    pooled = collect_trials(config, trials=6, workers=3)
    np.testing.assert_array_equal(single.awva, pooled.awva)
    np.testing.assert_array_equal(single.swva, pooled.swva)
    np.testing.assert_array_equal(single.reference_max, pooled.reference_max)


def test_trial_ranges_compose(trial_config):
    config = trial_config(noise_amplitude=0.2, base_seed=3)
    whole = run_trial_range(config, 0, 4)
    parts = run_trial_range(config, 0, 2) + run_trial_range(config, 2, 4)
    assert [o.awva for o in whole] == [o.awva for o in parts]
    assert [o.index for o in whole] == [0, 1, 2, 3]


def test_awva_spread_grows_with_noise(trial_config):
    quiet, _ = run_trials(trial_config(noise_amplitude=0.1, base_seed=11), trials=30)
    loud, _ = run_trials(trial_config(noise_amplitude=0.5, base_seed=11), trials=30)
    assert loud.std_dev > quiet.std_dev > 0.0


def test_correlated_noise_changes_outcomes(trial_config):
    independent = collect_trials(trial_config(noise_amplitude=0.2, base_seed=5), trials=3)
    correlated = collect_trials(trial_config(noise_amplitude=0.2, base_seed=5, correlated_noise=True), trials=3)
    assert not np.array_equal(independent.awva, correlated.awva)


def test_readout_noise_perturbs_awva_only(trial_config):
    config = trial_config(estimator=EstimatorOptions(readout_noise=1e-4), base_seed=2)
    batch = collect_trials(config, trials=3)
    assert batch.awva_stats().std_dev > 0.0
    assert batch.swva_stats().std_dev == 0.0


def test_batch_readings(trial_config):
    batch = collect_trials(trial_config(), trials=3)
    reading = batch.reading('reference_max')
    assert reading.trials == 3
    assert reading.max_value == pytest.approx(batch.context.reference_max)
    assert batch.sensitivity_stats().mean == pytest.approx(batch.context.k_ref)


def test_failed_estimates_are_counted(trial_config):
    config = trial_config()
    context = prepare_context(config)
    outcomes = run_trial_range(config, 0, 2)
    broken = TrialOutcome(2, math.nan, math.nan, math.nan, math.nan, math.nan, math.nan)
    batch = TrialBatch.from_outcomes(config, context, outcomes + [broken])
    assert batch.trials == 3
    assert batch.awva_failures == 1
    assert batch.swva_failures == 1
    assert batch.awva_stats().mean == 1.0
    assert batch.awva_stats().failures == 1


@pytest.mark.parametrize('trials, workers, expected', [
    (10, 3, [(0, 4), (4, 7), (7, 10)]),
    (2, 8, [(0, 1), (1, 2)]),
    (5, 1, [(0, 5)]),
    (0, 4, []),
])
def test_split_chunks(trials, workers, expected):
    assert split_chunks(trials, workers) == expected


def test_execute_trials_rejects_zero_workers(trial_config):
    with pytest.raises(ConfigurationError):
        execute_trials(trial_config(), 4, workers=0)


def _awva_wins(awva, swva):
    return awva.std_dev < swva.std_dev and abs(awva.mean - 1) < abs(swva.mean - 1)


@pytest.mark.slow
def test_noise_robustness_across_the_noise_grid():
    """Mean/std pattern of K^A and K^W over the shipped noise sweep at 200 Hz, 50 us"""
    config = load_sweep_config(SWEEPS / 'noise_sweep.yaml')
    workers = os.cpu_count() or 1
    grid = [round(amplitude * 1e3) for amplitude in config.noise_amplitudes]
    stats = {
        noise_mv: run_trials(config.trial_config(200.0, 5e-5, noise_mv * 1e-3), config.trials, workers)
        for noise_mv in grid
    }

    for noise_mv in (n for n in grid if n <= 100):
        awva, swva = stats[noise_mv]
        assert 0.8 <= awva.mean <= 1.25
        assert 0.8 <= swva.mean <= 1.25
        assert swva.std_dev < awva.std_dev

    middle = [n for n in grid if 300 <= n <= 1200]
    wins = [i for i, noise_mv in enumerate(middle) if _awva_wins(*stats[noise_mv])]
    assert wins
    assert wins == list(range(wins[0], wins[-1] + 1))

    high = [n for n in grid if n >= 1400]
    assert any(stats[noise_mv][1].mean < 0 for noise_mv in high)
    assert all(stats[noise_mv][0].mean > 0 for noise_mv in high)

    spreads = [stats[noise_mv][0].std_dev for noise_mv in grid if noise_mv >= 400]
    assert all(later >= earlier for earlier, later in zip(spreads, spreads[1:]))
