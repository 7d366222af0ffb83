"""Harness configuration.

Settings are layered on a flask.Config: built-in defaults, then an optional
JSON file (or an explicit test mapping), then command-line overrides. Only
upper-case keys are kept.
"""
import json
import os

from flask import Config

DEFAULTS = dict(
    LOG_LEVEL='INFO',
    LOG_FILE=None,
    LOG_MAX_BYTES=5 * 1024 * 1024,
    LOG_BACKUP_COUNT=5,
    # Product-space size guard for global joints
    MAX_JOINT_CELLS=10**6,
    # Threads used for per-sample fusion; 1 keeps everything in-process
    WORKERS=1,
    # Fraction of each sensor's singleton evidence moved to the frame in the
    # Dempster-Shafer baseline
    DS_EVIDENCE_DISCOUNT=0.0,
    # Merge weights for features reported by more than one sensor
    SENSOR_WEIGHTS={},
)


def load_config(config_file=None, test_config=None, root_path=None, overrides=None):
    """
    Build the harness settings.

    Args:
        config_file: Optional path to a JSON settings file. Missing files are
                     an error only when the path was given explicitly.
        test_config: Mapping applied instead of the file layer (tests).
        overrides: Mapping applied last (command-line flags).
        root_path: Base directory for relative config paths.

    Returns:
        flask.Config: The merged settings.
    """
    config = Config(root_path or os.getcwd())
    config.from_mapping(DEFAULTS)

    if test_config is None:
        if config_file:
            config.from_file(config_file, load=json.load)
        else:
            config.from_file('eventfusion.json', load=json.load, silent=True)
    else:
        config.from_mapping(test_config)
    if overrides:
        config.from_mapping(overrides)

    if int(config['WORKERS']) < 1:
        raise ValueError(f"WORKERS must be at least 1, got {config['WORKERS']!r}")
    if not 0.0 <= float(config['DS_EVIDENCE_DISCOUNT']) <= 1.0:
        raise ValueError("DS_EVIDENCE_DISCOUNT must lie in [0, 1]")
    return config
