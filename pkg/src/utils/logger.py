"""Logging configuration for the simulation engine."""

import logging
import sys
from pathlib import Path
from typing import Optional

import structlog
from loguru import logger as loguru_logger


def setup_logging(log_level: str = "INFO", log_file: Optional[str] = "logs/simulation.log") -> None:
    """
    Configure console/file logging and structured run events.

    Args:
        log_level: Logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL)
        log_file: Path to log file, or None/"" to disable file logging
    """
    loguru_logger.remove()

    # stdout carries JSON reports, so human-readable logs go to stderr
    loguru_logger.add(
        sys.stderr,
        level=log_level,
        format="<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level: <8}</level> | <cyan>{extra[name]}</cyan>:<cyan>{function}</cyan> - <level>{message}</level>",
        colorize=True,
    )

    if log_file:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        loguru_logger.add(
            log_file,
            level=log_level,
            rotation="10 MB",
            retention="7 days",
            compression="zip",
            format="{time:YYYY-MM-DD HH:mm:ss} | {level: <8} | {extra[name]}:{function} - {message}",
        )

    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.StackInfoRenderer(),
            structlog.processors.format_exc_info,
            structlog.processors.JSONRenderer(sort_keys=True),
        ],
        wrapper_class=structlog.make_filtering_bound_logger(getattr(logging, log_level.upper(), logging.INFO)),
        context_class=dict,
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=True,
    )


def get_logger(name: str):
    """
    Get a logger instance.

    Args:
        name: Logger name (typically __name__)

    Returns:
        Logger instance
    """
    return loguru_logger.bind(name=name)


def get_event_logger(**context):
    """
    Get a structured (JSON) logger for run-level events.

    Args:
        **context: Key/values bound to every event (subcommand, seed, ...)

    Returns:
        structlog bound logger
    """
    return structlog.get_logger().bind(**context)


# Default logger
logger = get_logger(__name__)
