"""
Logging for the engine

Every module logs through a child of one package logger, so the rotating log
file and the console handler are attached once. The console writes to stderr
at the level chosen by the command line's -v flags; stdout carries results.
"""
import logging
import logging.handlers
import sys
import os

# Import config
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))
from config import Config

CONSOLE_HANDLER = 'console'
VERBOSITY_LEVELS = ('WARNING', 'INFO', 'DEBUG')


def package_logger(log_file=None, level=None):
    """
    The shared package logger, configured on first use

    Args:
        log_file: Path to log file (optional, uses Config default)
        level: Level name for the package logger (optional, uses Config default)
    """
    logger = logging.getLogger(Config.LOGGER_NAME)
    if logger.handlers:
        return logger

    logger.setLevel(level or Config.LOG_LEVEL)
    logger.propagate = False

    file_handler = logging.handlers.RotatingFileHandler(
        log_file or Config.get_log_path(),
        maxBytes=Config.LOG_MAX_BYTES,
        backupCount=Config.LOG_BACKUP_COUNT
    )
    file_handler.setLevel(logging.DEBUG)
    file_handler.setFormatter(logging.Formatter(Config.LOG_FORMAT))
    logger.addHandler(file_handler)

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.set_name(CONSOLE_HANDLER)
    console_handler.setLevel(Config.CONSOLE_LOG_LEVEL)
    console_handler.setFormatter(logging.Formatter('%(levelname)s - %(message)s'))
    logger.addHandler(console_handler)

    return logger


def setup_logger(name, log_file=None, level=None):
    """
    Logger for one module, nested under the package logger

    Args:
        name: Logger name (usually __name__)
        log_file: Path to log file when the package logger is first configured
        level: Package level when the package logger is first configured

    Returns:
        Configured logger instance
    """
    return package_logger(log_file, level).getChild(name)


def set_verbosity(count):
    """
    Console level from a -v count: 0 warnings, 1 info, 2 or more debug

    Returns:
        The level name now in effect on the console
    """
    level = VERBOSITY_LEVELS[max(0, min(count, len(VERBOSITY_LEVELS) - 1))]
    logger = package_logger()
    for handler in logger.handlers:
        if handler.get_name() == CONSOLE_HANDLER:
            handler.setLevel(level)
    logger.setLevel(min(logging.getLevelName(level), logging.getLevelName(Config.LOG_LEVEL)))
    return level
