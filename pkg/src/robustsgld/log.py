"""Logging setup for the command line."""

from __future__ import annotations

import logging
import os

from rich.console import Console
from rich.logging import RichHandler

LOG_LEVEL_ENV = "ROBUSTSGLD_LOG_LEVEL"


def configure_logging(verbose: bool = False) -> None:
    """Route the ``robustsgld`` loggers to a rich handler on stderr.

    Library modules only create loggers; handlers are attached here, once, by
    the CLI entry point.
    """
    level = "DEBUG" if verbose else os.getenv(LOG_LEVEL_ENV, "WARNING").upper()
    handler = RichHandler(console=Console(stderr=True), show_path=False)
    handler.setFormatter(logging.Formatter("%(message)s", datefmt="[%X]"))

    logger = logging.getLogger("robustsgld")
    logger.handlers.clear()
    logger.addHandler(handler)
    try:
        logger.setLevel(level)
    except ValueError:
        logger.setLevel(logging.WARNING)
        logger.warning("Invalid value for %s: %s", LOG_LEVEL_ENV, level)
    logger.propagate = False
