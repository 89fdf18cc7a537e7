"""
Logging Module
=================

This module handles all logging operations including:
- The shared `swr` logger (colored console output, optional log file)
- Status code mapping for activity messages
- JSON-lines activity records written next to run outputs

Functions in this module provide consistent logging across the package.
"""

import json
import logging
from pathlib import Path
from typing import Optional, Union

import colorlog  # type: ignore

from config import LOG_FILE, LOG_LEVEL

logger = logging.getLogger("swr")

# Status code mapping for activity messages
STATUS_MAP = {
    -1: {"level": logging.DEBUG, "title": "No Code"},
    0: {"level": logging.INFO, "title": "Info"},
    1: {"level": logging.WARNING, "title": "Warning"},
    2: {"level": logging.ERROR, "title": "Error"},
    3: {"level": logging.INFO, "title": "Success"},
    4: {"level": logging.DEBUG, "title": "Debug"},
}

_FILE_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'


def setup_logging(level: Union[str, int] = LOG_LEVEL, log_file: Optional[str] = LOG_FILE) -> logging.Logger:
    """
    Configures the package logger. Safe to call more than once.

    Args:
        level: Logging level name or number for the console handler.
        log_file: Optional path of a log file receiving DEBUG and above.

    Returns:
        logging.Logger: The configured `swr` logger.
    """
    logger.setLevel(logging.DEBUG)
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()

    console_handler = logging.StreamHandler()
    console_handler.setLevel(level)
    color_formatter = colorlog.ColoredFormatter(
        "%(asctime)s - %(log_color)s%(levelname)s%(reset)s - %(message)s",
        datefmt='%Y-%m-%d %H:%M:%S',
        log_colors={
            'DEBUG': 'light_purple',
            'INFO': 'cyan',
            'WARNING': 'yellow',
            'ERROR': 'red',
            'CRITICAL': 'bold_red',
        },
        reset=True
    )
    console_handler.setFormatter(color_formatter)
    logger.addHandler(console_handler)

    if log_file:
        file_handler = logging.FileHandler(log_file)
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(logging.Formatter(_FILE_FORMAT))
        logger.addHandler(file_handler)

    logger.propagate = False
    return logger


def activity_log(message: str, status: int = -1, record_path: Optional[Union[str, Path]] = None):
    """
    Logs a status-coded message and optionally appends it to a JSON-lines record.

    Args:
        message: Message to log.
        status: Status of message (-1: No Code, 0: Info, 1: Warning, 2: Error, 3: Success, 4: Debug).
        record_path: Optional activity file; one JSON object per line is appended.

    Returns:
        None
    """
    status_info = STATUS_MAP.get(status, STATUS_MAP[-1])
    logger.log(status_info["level"], message)

    if record_path is None:
        return

    record = json.dumps({"status": status_info["title"], "message": message})
    try:
        with open(record_path, "a", encoding="utf-8") as handle:
            handle.write(record + "\n")
    except OSError as e:
        logger.error(f"Error writing activity record to {record_path}: {e}")


setup_logging()
