"""
eventfusion - decision-level sensor fusion over boolean combinations of feature events.

Internal modules:
  probability_model  - event spaces, reports, coupling tables, entropy and MI
  coupling           - min-MI, greedy max-MI and blended couplings, rho estimation
  fusion_engine      - global joints, formula evaluation, fused reports
  definitions        - definition-file language: parser, resolver, printer
  calibration        - Platt scaling and 2-sigma event ranges
  baselines          - Dempster-Shafer and independence fusion
  scenario, metrics, report_io, cli - experiment harness
"""
import logging
import sys
from logging.handlers import RotatingFileHandler

from .config import load_config
from .system_logger import LOGGER_NAME

__version__ = '0.3.0'

_LOG_FORMAT = '%(asctime)s %(levelname)s: %(message)s [in %(pathname)s:%(lineno)d]'


def create_harness(test_config=None, config_file=None, overrides=None):
    """
    Load settings and configure logging for a harness run.

    Args:
        test_config: Mapping that replaces the JSON file layer (tests).
        config_file: Optional JSON settings file.
        overrides: Settings that win over both (command-line flags).

    Returns:
        flask.Config: The merged settings.
    """
    config = load_config(config_file=config_file, test_config=test_config, overrides=overrides)

    # --- Logging Configuration ---
    logger = logging.getLogger(LOGGER_NAME)
    for handler in list(logger.handlers):
        if getattr(handler, '_eventfusion', False):
            logger.removeHandler(handler)
            handler.close()

    formatter = logging.Formatter(_LOG_FORMAT)

    stream_handler = logging.StreamHandler(sys.stderr)
    stream_handler.setFormatter(formatter)
    stream_handler._eventfusion = True
    logger.addHandler(stream_handler)

    if config.get('LOG_FILE'):
        # Rotating file handler: size and backup count come from settings
        file_handler = RotatingFileHandler(
            config['LOG_FILE'],
            maxBytes=config['LOG_MAX_BYTES'],
            backupCount=config['LOG_BACKUP_COUNT'],
        )
        file_handler.setFormatter(formatter)
        file_handler._eventfusion = True
        logger.addHandler(file_handler)

    logger.setLevel(str(config['LOG_LEVEL']).upper())
    logger.debug('eventfusion harness configured.')
    return config
