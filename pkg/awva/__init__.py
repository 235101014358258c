import os
import logging
from logging.handlers import RotatingFileHandler

from config import get_config

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s %(levelname)s [%(name)s] %(message)s'

# Handler installed by configure_logging, replaced on reconfiguration
_runtime_handler = None


def configure_logging(config_class):
    """Attach one stdout or rotating-file handler to the root logger"""
    global _runtime_handler

    root = logging.getLogger()
    if _runtime_handler is not None:
        root.removeHandler(_runtime_handler)
        _runtime_handler.close()

    to_stdout = str(config_class.LOG_TO_STDOUT or '').lower() in ('true', '1', 'yes', 'on')
    if to_stdout or not config_class.LOG_DIR:
        handler = logging.StreamHandler()
    else:
        os.makedirs(config_class.LOG_DIR, exist_ok=True)
        handler = RotatingFileHandler(
            os.path.join(config_class.LOG_DIR, 'awva.log'),
            maxBytes=config_class.LOG_MAX_BYTES,
            backupCount=config_class.LOG_BACKUP_COUNT,
            encoding='utf-8',
        )
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root.addHandler(handler)

    level = getattr(logging, str(config_class.LOG_LEVEL).upper(), None)
    if not isinstance(level, int):
        logger.warning(f"⚠️ Unknown log level {config_class.LOG_LEVEL!r}, using INFO")
        level = logging.INFO
    root.setLevel(level)
    _runtime_handler = handler
    return handler


def create_runtime(config_class=None):
    """Resolve the runtime configuration and set up logging; returns the config class"""
    config_class = config_class or get_config()
    configure_logging(config_class)
    logger.debug(f"Runtime configured ({config_class.ENV_NAME}, workers={config_class.WORKERS})")
    return config_class
