"""
Command-line interface: `awva <command> --config sweep.yaml --out results/`
"""

import functools
import logging
from dataclasses import replace

import click

from awva import create_runtime
from awva.errors import AWVAError
from awva.experiments.commands import (
    cmd_calibrate_phase,
    cmd_ingest,
    cmd_simulate,
    cmd_sweep_frequency,
    cmd_sweep_noise,
)
from awva.experiments.config_file import load_sweep_config
from awva.utils.settings import (
    get_default_trials,
    get_default_workers,
    get_max_failure_fraction,
    get_output_dir,
)

logger = logging.getLogger(__name__)


def handle_errors(command):
    """Turn library exceptions into their exit codes"""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        ctx = click.get_current_context()
        try:
            command(*args, **kwargs)
        except AWVAError as e:
            logger.error(f'{type(e).__name__}: {e}')
            click.echo(f'❌ {e}', err=True)
            ctx.exit(e.exit_code)

    return wrapper


def common_options(command):
    command = click.option('--out', 'out_dir', type=click.Path(file_okay=False),
                           help='Output directory (default: AWVA_OUTPUT_DIR)')(command)
    command = click.option('--seed', type=click.IntRange(0, 2 ** 64 - 1),
                           help='Override sweep.base_seed')(command)
    command = click.option('--trials', type=click.IntRange(min=2),
                           help='Override sweep.trials')(command)
    command = click.option('--workers', type=click.IntRange(min=1),
                           help='Worker processes (default: AWVA_WORKERS)')(command)
    command = click.option('--plot-data', is_flag=True,
                           help='Also write curve,x,y plot-data files')(command)
    return command


def _load(runtime, config_path, seed, trials):
    config = load_sweep_config(
        config_path,
        default_trials=get_default_trials(runtime.DEFAULT_TRIALS),
        default_max_failure_fraction=get_max_failure_fraction(runtime.MAX_FAILURE_FRACTION),
    )
    overrides = {}
    if seed is not None:
        overrides['base_seed'] = seed
    if trials is not None:
        overrides['trials'] = trials
    return replace(config, **overrides) if overrides else config


def _out(runtime, out_dir):
    return out_dir or get_output_dir(runtime.OUTPUT_DIR)


def _workers(runtime, workers):
    return workers or get_default_workers(runtime.WORKERS)


def _echo_result(result):
    for key, value in result.summary.items():
        if key == 'bands':
            continue
        click.echo(f'{key}: {value}')
    for path in result.files:
        click.echo(f'✅ wrote {path}')


@click.group()
@click.option('--log-level', default=None, help='Override AWVA_LOG_LEVEL',
              type=click.Choice(['DEBUG', 'INFO', 'WARNING', 'ERROR'], case_sensitive=False))
@click.pass_context
def cli(ctx, log_level):
    """Analog vs standard weak-value amplification simulator"""
    runtime = create_runtime()
    if log_level:
        logging.getLogger().setLevel(log_level.upper())
    ctx.obj = runtime


@cli.command()
@click.option('--config', 'config_path', required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--shift-us', type=float, help='Pointer shift in microseconds (default: first sweep.delta_t)')
@click.option('--noise-mv', type=float, help='Noise amplitude in millivolts (default: first sweep.noise)')
@common_options
@click.pass_obj
@handle_errors
def simulate(runtime, config_path, shift_us, noise_mv, out_dir, seed, trials, workers, plot_data):
    """Single-shot waveform and Theta dump"""
    config = _load(runtime, config_path, seed, trials)
    result = cmd_simulate(
        config,
        _out(runtime, out_dir),
        shift=None if shift_us is None else shift_us * 1e-6,
        noise=None if noise_mv is None else noise_mv * 1e-3,
        plot_data=plot_data,
    )
    _echo_result(result)


@cli.command('sweep-frequency')
@click.option('--config', 'config_path', required=True, type=click.Path(exists=True, dir_okay=False))
@common_options
@click.pass_obj
@handle_errors
def sweep_frequency(runtime, config_path, out_dir, seed, trials, workers, plot_data):
    """Sensitivity K over frequencies and shifts"""
    config = _load(runtime, config_path, seed, trials)
    _echo_result(cmd_sweep_frequency(config, _out(runtime, out_dir), _workers(runtime, workers), plot_data))


@cli.command('sweep-noise')
@click.option('--config', 'config_path', required=True, type=click.Path(exists=True, dir_okay=False))
@common_options
@click.pass_obj
@handle_errors
def sweep_noise(runtime, config_path, out_dir, seed, trials, workers, plot_data):
    """Normalized sensitivities K^W and K^A over noise amplitudes"""
    config = _load(runtime, config_path, seed, trials)
    result = cmd_sweep_noise(config, _out(runtime, out_dir), _workers(runtime, workers), plot_data)
    _echo_result(result)
    for (frequency, delta_t), band in result.summary['bands'].items():
        label = 'none' if band is None else f'{band[0]:g}-{band[1]:g} mV'
        click.echo(f'advantage band at {frequency:g} Hz, {delta_t * 1e6:g} us: {label}')


@cli.command('calibrate-phase')
@click.option('--config', 'config_path', required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--scope', type=click.Path(exists=True, dir_okay=False), help='Waveform CSV with the two input channels')
@click.option('--observed', type=click.Path(exists=True, dir_okay=False), help='CSV holding the observed Theta column')
@click.option('--channel', 'channels', multiple=True, help='Channel column name (give twice)')
@click.option('--theta-column', default='theta_observed_v', show_default=True)
@click.option('--fit-gain', is_flag=True, help='Fit gain and polarity instead of using the configured circuit')
@common_options
@click.pass_obj
@handle_errors
def calibrate_phase(runtime, config_path, scope, observed, channels, theta_column, fit_gain,
                    out_dir, seed, trials, workers, plot_data):
    """Recover the circuit phase lag t_phi"""
    config = _load(runtime, config_path, seed, trials)
    result = cmd_calibrate_phase(
        config, _out(runtime, out_dir),
        scope=scope, observed=observed, channels=channels or None,
        theta_column=theta_column, fit_gain=fit_gain,
    )
    _echo_result(result)


@cli.command()
@click.argument('scope', type=click.Path(exists=True, dir_okay=False))
@click.option('--config', 'config_path', type=click.Path(exists=True, dir_okay=False))
@click.option('--channel', 'channels', multiple=True, help='Channel column name (give twice)')
@common_options
@click.pass_obj
@handle_errors
def ingest(runtime, scope, config_path, channels, out_dir, seed, trials, workers, plot_data):
    """Run a scope CSV export through the correlator"""
    config = _load(runtime, config_path, seed, trials) if config_path else None
    result = cmd_ingest(scope, _out(runtime, out_dir), config, channels=channels or None, plot_data=plot_data)
    _echo_result(result)
