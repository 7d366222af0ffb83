"""System Event Logger - component-tagged structured logging for eventfusion"""
import json
import logging

SUCCESS_LEVEL = 25
logging.addLevelName(SUCCESS_LEVEL, 'SUCCESS')

LOGGER_NAME = 'eventfusion'


class SystemLogger:
    """Logger for library and harness events"""

    # Log levels
    INFO = 'info'
    WARNING = 'warning'
    ERROR = 'error'
    SUCCESS = 'success'
    DEBUG = 'debug'

    # Components
    MODEL = 'model'
    COUPLING = 'coupling'
    FUSION = 'fusion'
    DSL = 'dsl'
    CALIBRATION = 'calibration'
    BASELINE = 'baseline'
    HARNESS = 'harness'
    CLI = 'cli'

    _LEVELS = {
        INFO: logging.INFO,
        WARNING: logging.WARNING,
        ERROR: logging.ERROR,
        SUCCESS: SUCCESS_LEVEL,
        DEBUG: logging.DEBUG,
    }

    @staticmethod
    def log(level, component, message, details=None):
        """
        Log an event on the eventfusion logger

        Args:
            level: Log level (INFO, WARNING, ERROR, SUCCESS, DEBUG)
            component: Component name (COUPLING, FUSION, etc.)
            message: Short message
            details: Optional dict with additional details (appended as JSON)
        """
        logger = logging.getLogger(f"{LOGGER_NAME}.{component}")
        numeric_level = SystemLogger._LEVELS.get(level, logging.INFO)
        if not logger.isEnabledFor(numeric_level):
            return

        details_json = None
        if details:
            if isinstance(details, dict):
                details_json = json.dumps(details, sort_keys=True, default=str)
            else:
                details_json = str(details)

        if details_json:
            logger.log(numeric_level, f"[{component}] {message} {details_json}", stacklevel=3)
        else:
            logger.log(numeric_level, f"[{component}] {message}", stacklevel=3)

    @staticmethod
    def info(component, message, details=None):
        """Log an informational event"""
        SystemLogger.log(SystemLogger.INFO, component, message, details)

    @staticmethod
    def warning(component, message, details=None):
        """Log a warning event"""
        SystemLogger.log(SystemLogger.WARNING, component, message, details)

    @staticmethod
    def error(component, message, details=None):
        """Log an error event"""
        SystemLogger.log(SystemLogger.ERROR, component, message, details)

    @staticmethod
    def success(component, message, details=None):
        """Log a success event"""
        SystemLogger.log(SystemLogger.SUCCESS, component, message, details)

    @staticmethod
    def debug(component, message, details=None):
        """Log a debug event"""
        SystemLogger.log(SystemLogger.DEBUG, component, message, details)


# Convenience instance
syslog = SystemLogger()
