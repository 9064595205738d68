"""
Logging configuration for the qubitdyne simulator.
"""
import logging
import sys
from pathlib import Path
from typing import Optional

from src.config.settings import settings


def setup_logging(level: Optional[str] = None, log_directory: Optional[str] = None) -> logging.Logger:
    """Configure logging for the application."""

    # Create logs directory if it doesn't exist
    log_dir = Path(log_directory or settings.log_directory)
    log_dir.mkdir(parents=True, exist_ok=True)

    # Configure root logger
    logger = logging.getLogger()
    logger.setLevel(getattr(logging, (level or settings.log_level).upper()))

    # Re-running setup must not stack handlers
    for handler in list(logger.handlers):
        if getattr(handler, "_qubitdyne", False):
            logger.removeHandler(handler)

    # Console handler
    console_handler = logging.StreamHandler(sys.stdout)
    console_handler.setLevel(logging.INFO)
    console_formatter = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )
    console_handler.setFormatter(console_formatter)

    # File handler
    file_handler = logging.FileHandler(log_dir / "qubitdyne.log")
    file_handler.setLevel(logging.DEBUG)
    file_formatter = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(filename)s:%(lineno)d - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )
    file_handler.setFormatter(file_formatter)

    # Add handlers
    for handler in (console_handler, file_handler):
        handler._qubitdyne = True
        logger.addHandler(handler)

    # Suppress noisy loggers
    logging.getLogger("numba").setLevel(logging.WARNING)

    return logger
