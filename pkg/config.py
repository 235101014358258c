import os
import logging
from dotenv import load_dotenv

basedir = os.path.abspath(os.path.dirname(__file__))
load_dotenv(os.path.join(basedir, '.env'))
logger = logging.getLogger(__name__)


class Config:
    ENV_NAME = 'default'

    # Logging
    LOG_LEVEL = os.environ.get('AWVA_LOG_LEVEL', 'INFO').upper()
    LOG_TO_STDOUT = os.environ.get('LOG_TO_STDOUT')
    LOG_DIR = os.environ.get('AWVA_LOG_DIR') or os.path.join(basedir, 'logs')
    LOG_MAX_BYTES = 5 * 1024 * 1024  # 5MB per log file
    LOG_BACKUP_COUNT = 5

    # Monte Carlo defaults; AWVA_WORKERS, AWVA_DEFAULT_TRIALS and
    # AWVA_MAX_FAILURE_FRACTION override them at run time (awva.utils.settings)
    WORKERS = 1
    DEFAULT_TRIALS = 10000
    MAX_FAILURE_FRACTION = 0.05

    # Output (AWVA_OUTPUT_DIR overrides)
    OUTPUT_DIR = os.path.join(basedir, 'results')


class DevelopmentConfig(Config):
    ENV_NAME = 'development'
    LOG_LEVEL = os.environ.get('AWVA_LOG_LEVEL', 'DEBUG').upper()
    LOG_TO_STDOUT = os.environ.get('LOG_TO_STDOUT', 'true')


class ProductionConfig(Config):
    ENV_NAME = 'production'
    WORKERS = os.cpu_count() or 1


class TestingConfig(Config):
    ENV_NAME = 'testing'
    TESTING = True
    LOG_LEVEL = 'WARNING'
    LOG_TO_STDOUT = 'true'
    WORKERS = 1
    DEFAULT_TRIALS = 200


config = {
    'development': DevelopmentConfig,
    'production': ProductionConfig,
    'testing': TestingConfig,
    'default': DevelopmentConfig
}


def get_config(name: str = None):
    """Config class for AWVA_ENV (or `name`), falling back to the default"""
    name = name or os.environ.get('AWVA_ENV', 'default')
    if name not in config:
        logger.warning(f'⚠️  Unknown AWVA_ENV {name!r}, using default configuration')
        name = 'default'
    return config[name]
