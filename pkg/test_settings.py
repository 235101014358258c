"""
Tests for runtime settings, config classes and logging setup
"""

import logging
from logging.handlers import RotatingFileHandler

import pytest

from awva import configure_logging, create_runtime
from awva.utils import settings
from config import DevelopmentConfig, ProductionConfig, TestingConfig, get_config


def test_get_config_follows_environment(monkeypatch):
    monkeypatch.setenv('AWVA_ENV', 'production')
    assert get_config() is ProductionConfig
    assert get_config('testing') is TestingConfig
    assert get_config('staging') is DevelopmentConfig


def test_testing_config_values():
    assert TestingConfig.WORKERS == 1
    assert TestingConfig.DEFAULT_TRIALS == 200
    assert ProductionConfig.WORKERS >= 1


def test_settings_read_environment(monkeypatch):
    monkeypatch.setenv('AWVA_WORKERS', '6')
    monkeypatch.setenv('AWVA_DEFAULT_TRIALS', '250')
    monkeypatch.setenv('AWVA_MAX_FAILURE_FRACTION', '0.1')
    monkeypatch.setenv('AWVA_OUTPUT_DIR', '/tmp/awva-out')
    assert settings.get_default_workers() == 6
    assert settings.get_default_trials() == 250
    assert settings.get_max_failure_fraction() == 0.1
    assert settings.get_output_dir() == '/tmp/awva-out'


def test_settings_fall_back_to_defaults(monkeypatch):
    monkeypatch.delenv('AWVA_WORKERS', raising=False)
    monkeypatch.delenv('AWVA_OUTPUT_DIR', raising=False)
    assert settings.get_default_workers(3) == 3
    assert settings.get_output_dir('results') == 'results'


@pytest.mark.parametrize('name, value, getter, default', [
    ('AWVA_WORKERS', 'many', settings.get_default_workers, 2),
    ('AWVA_WORKERS', '0', settings.get_default_workers, 1),
    ('AWVA_MAX_FAILURE_FRACTION', '1.5', settings.get_max_failure_fraction, 0.05),
    ('AWVA_DEFAULT_TRIALS', 'lots', settings.get_default_trials, 10000),
])
def test_invalid_settings_use_defaults(monkeypatch, name, value, getter, default):
    monkeypatch.setenv(name, value)
    assert getter(default) == default


def test_cache_is_invalidated(monkeypatch):
    monkeypatch.setenv('AWVA_WORKERS', '2')
    assert settings.get_default_workers() == 2
    monkeypatch.setenv('AWVA_WORKERS', '5')
    assert settings.get_default_workers() == 2
    settings.invalidate_cache()
    assert settings.get_default_workers() == 5


def test_file_logging(tmp_path):
    class FileConfig(TestingConfig):
        LOG_TO_STDOUT = None
        LOG_DIR = str(tmp_path / 'logs')
        LOG_LEVEL = 'DEBUG'

    try:
        handler = configure_logging(FileConfig)
        assert isinstance(handler, RotatingFileHandler)
        assert handler in logging.getLogger().handlers
        logging.getLogger('awva.test').debug('hello')
        handler.flush()
        assert 'hello' in (tmp_path / 'logs' / 'awva.log').read_text(encoding='utf-8')
    finally:
        create_runtime(TestingConfig)


def test_runtime_replaces_its_handler():
    root = logging.getLogger()
    create_runtime(TestingConfig)
    before = len(root.handlers)
    runtime = create_runtime(TestingConfig)
    assert runtime is TestingConfig
    assert len(root.handlers) == before
    assert root.level == logging.WARNING
