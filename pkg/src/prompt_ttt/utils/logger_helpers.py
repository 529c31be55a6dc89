"""Logger helpers and custom classes for prompt_ttt.

Classes:
    EnvironmentFilter: Injects current environment into log records.
    SafeFormatter: Formatter that tolerates records without the `env` attribute.
    RunRotatingFileHandler: Rotating file handler naming backups
        prompt_ttt_1.log, prompt_ttt_2.log, ... instead of prompt_ttt.log.1.
    StreamFilter: Drops console records while suppression is active.

Functions:
    suppress_console_logging(): Context manager muting console handlers.
    rotated_name(): Map a stdlib rotation filename to the run naming scheme.
"""

# ---------------------------------------------------------------------
# Imports
# ---------------------------------------------------------------------

from __future__ import annotations

import logging
import threading
from collections.abc import Iterator
from contextlib import contextmanager
from logging.handlers import RotatingFileHandler
from typing import Any, Literal

__all__ = [
    "EnvironmentFilter",
    "RunRotatingFileHandler",
    "SafeFormatter",
    "StreamFilter",
    "rotated_name",
    "suppress_console_logging",
]


# ---------------------------------------------------------------------
# Console Output Suppression
# ---------------------------------------------------------------------

_SUPPRESS_CONSOLE_OUTPUT = threading.local()
_SUPPRESS_CONSOLE_OUTPUT.value = False


class StreamFilter(logging.Filter):
    """Filter that disables console output while suppression is active."""

    def filter(self, _record: logging.LogRecord) -> bool:
        return not getattr(_SUPPRESS_CONSOLE_OUTPUT, "value", False)


@contextmanager
def suppress_console_logging() -> Iterator[None]:
    """Temporarily suppress console handlers (thread-local flag)."""
    old_value = getattr(_SUPPRESS_CONSOLE_OUTPUT, "value", False)
    _SUPPRESS_CONSOLE_OUTPUT.value = True
    try:
        yield
    finally:
        _SUPPRESS_CONSOLE_OUTPUT.value = old_value


# ---------------------------------------------------------------------
# Log Record Filters
# ---------------------------------------------------------------------


class EnvironmentFilter(logging.Filter):
    """Injects the current environment (DEV, UAT, PROD, TEST) into log records."""

    def filter(self, record: logging.LogRecord) -> bool:
        # Delayed import: settings -> formatter -> this module
        from prompt_ttt.settings import get_environment

        record.env = get_environment()
        return True


# ---------------------------------------------------------------------
# Formatters
# ---------------------------------------------------------------------


class SafeFormatter(logging.Formatter):
    """Formatter that substitutes a missing `env` attribute with UNKNOWN."""

    def __init__(
        self,
        fmt: str | None = None,
        datefmt: str | None = None,
        style: Literal["%", "{", "$"] = "%",
    ) -> None:
        super().__init__(fmt=fmt, datefmt=datefmt, style=style)

    def format(self, record: logging.LogRecord) -> str:
        if not hasattr(record, "env"):
            record.env = "UNKNOWN"
        return super().format(record)


# ---------------------------------------------------------------------
# Rotating file handler
# ---------------------------------------------------------------------


def rotated_name(default_name: str) -> str:
    """Rename rotated files: prompt_ttt.log.1 -> prompt_ttt_1.log."""
    if ".log." in default_name:
        base, suffix = default_name.rsplit(".log.", maxsplit=1)
        if suffix.isdigit():
            return f"{base}_{suffix}.log"
    return default_name


class RunRotatingFileHandler(RotatingFileHandler):
    """RotatingFileHandler whose backups keep the `.log` extension."""

    def __init__(self, *args: Any, **kwargs: Any) -> None:
        super().__init__(*args, **kwargs)
        self.namer = rotated_name
