#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
HierNav - Logger
----------------
Functions for setting up and using the logging system
"""

import datetime
import logging
import logging.handlers
import platform
import sys
import traceback
from pathlib import Path

from core.constants import LOGGER_ROOT
from core.errors import HierNavError

FILE_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
CONSOLE_FORMAT = "%(levelname)s: %(message)s"


def setup_logger(console_level=logging.INFO, log_dir="logs"):
    """
    Setup logging system with a rotating file log and a console handler

    Args:
        console_level (int): Logging level for console output
        log_dir (str | Path | None): Directory for log files, None disables file logging

    Returns:
        logging.Logger: Configured root logger
    """
    root_logger = logging.getLogger()

    # Remove existing handlers to avoid duplicates
    for handler in root_logger.handlers[:]:
        root_logger.removeHandler(handler)

    root_logger.setLevel(logging.DEBUG)

    if log_dir is not None:
        logs_dir = Path(log_dir)
        current_time = datetime.datetime.now().strftime("%Y%m%d_%H%M%S")
        log_file = logs_dir / f"hiernav_{current_time}.log"
        try:
            logs_dir.mkdir(exist_ok=True, parents=True)
            rotating_handler = logging.handlers.RotatingFileHandler(
                log_file, maxBytes=5 * 1024 * 1024, backupCount=5, encoding="utf-8"
            )
            rotating_handler.setLevel(logging.DEBUG)
            rotating_handler.setFormatter(logging.Formatter(FILE_FORMAT))
            root_logger.addHandler(rotating_handler)
        except OSError as e:
            print(f"Failed to set up file handler: {e}", file=sys.stderr)

    console_handler = logging.StreamHandler()
    console_handler.setLevel(console_level)
    console_handler.setFormatter(logging.Formatter(CONSOLE_FORMAT))
    root_logger.addHandler(console_handler)

    # Loggers created at import time carry a fallback handler; route them to root
    for name, existing in logging.root.manager.loggerDict.items():
        if name.startswith(LOGGER_ROOT) and isinstance(existing, logging.Logger):
            for handler in existing.handlers[:]:
                existing.removeHandler(handler)
            existing.setLevel(logging.NOTSET)
            existing.propagate = True

    root_logger.debug(f"Logging initialized at {datetime.datetime.now().isoformat()}")
    root_logger.debug(f"Python version: {sys.version}")
    root_logger.debug(f"Platform: {platform.platform()}")

    return root_logger


def get_logger(name=LOGGER_ROOT):
    """
    Get logger for specific module

    Args:
        name (str): Logger name/category, e.g. "hiernav.graph"

    Returns:
        logging.Logger: Logger for the specified name
    """
    logger = logging.getLogger(name)

    # Minimal console output when the application never configured logging
    if not logger.handlers and not logging.getLogger().handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(CONSOLE_FORMAT))
        logger.addHandler(handler)
        logger.setLevel(logging.INFO)
        logger.propagate = False

    return logger


def log_exception(logger, e, message="An error occurred"):
    """
    Log a failure at ERROR with its traceback at DEBUG

    Configuration errors name the offending key; exceptions from outside the
    library are prefixed with their class name.

    Args:
        logger (logging.Logger): Logger to use
        e (Exception): The exception to log
        message (str): Context, usually the command that failed
    """
    detail = str(e) or type(e).__name__
    if not isinstance(e, HierNavError):
        detail = f"{type(e).__name__}: {detail}"
    key = getattr(e, "key", None)
    if key:
        detail = f"{detail} [{key}]"
    logger.error(f"{message}: {detail}")
    logger.debug("".join(traceback.format_exception(type(e), e, e.__traceback__)))
