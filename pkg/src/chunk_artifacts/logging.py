"""Diagnostic logging for chunk-artifacts.

Every record goes to stderr. stdout belongs to the one JSON line each command prints.
"""

import logging
import sys
from pathlib import Path
from typing import Optional

from rich.console import Console
from rich.logging import RichHandler

LOGGER_NAME = "chunk_artifacts"
LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")

_PLAIN_FORMAT = "%(asctime)s %(levelname)-8s %(name)s: %(message)s"
_DATE_FORMAT = "%Y-%m-%d %H:%M:%S"


def parse_level(level: str) -> int:
    """
    Numeric level for one of ``LEVELS`` (case-insensitive).

    Raises:
        ValueError: If the name is not a known level
    """
    name = level.strip().upper()
    if name not in LEVELS:
        raise ValueError(f"unknown log level '{level}', choose from {', '.join(LEVELS)}")
    return getattr(logging, name)


def _console_handler(use_rich: bool) -> logging.Handler:
    if not use_rich:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter(_PLAIN_FORMAT, datefmt=_DATE_FORMAT))
        return handler
    return RichHandler(
        console=Console(stderr=True),
        show_path=False,
        markup=False,
        rich_tracebacks=True,
    )


def setup_logging(
    level: str = "INFO",
    log_file: Optional[str | Path] = None,
    use_rich: bool = True,
) -> logging.Logger:
    """
    Configure the package logger. Calling it again replaces the previous handlers.

    Args:
        level: One of DEBUG, INFO, WARNING or ERROR
        log_file: Also append plain records to this file
        use_rich: Rich console output; plain lines otherwise

    Returns:
        The ``chunk_artifacts`` logger
    """
    numeric = parse_level(level)
    logger = logging.getLogger(LOGGER_NAME)
    logger.setLevel(numeric)
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()
    logger.propagate = False

    logger.addHandler(_console_handler(use_rich))
    if log_file:
        path = Path(log_file)
        path.parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(path, mode="a", encoding="utf-8")
        file_handler.setFormatter(logging.Formatter(_PLAIN_FORMAT, datefmt=_DATE_FORMAT))
        logger.addHandler(file_handler)
    return logger


def progress_enabled() -> bool:
    """Progress bars are shown only while the package logs at INFO or below."""
    return logging.getLogger(LOGGER_NAME).getEffectiveLevel() <= logging.INFO


def get_logger(name: str) -> logging.Logger:
    """Child logger ``chunk_artifacts.<name>``."""
    return logging.getLogger(f"{LOGGER_NAME}.{name}")
