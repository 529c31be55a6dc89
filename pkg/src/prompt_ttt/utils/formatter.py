"""Shared formatting utilities for prompt_ttt.

Provides reusable formatting functions for:

- Writing informational, warning, error, debug, success and settings messages
  to both terminal and logger (via `echo()`).
- Rendering metric tables as aligned console text and as markdown.
- Determining whether color output should be used.

Color handling is provided via `colorama`.

Functions:
    echo(): Write a formatted message to terminal and logger.
    should_use_color(): Determine whether color output should be used.
    format_metric(): Render one metric value (NaN as "n/a").
    format_table_lines(): Aligned console table.
    format_markdown_table(): GitHub-flavored markdown table.
"""

# ---------------------------------------------------------------------
# Imports
# ---------------------------------------------------------------------

from __future__ import annotations

import math
import sys
from collections.abc import Callable, Sequence
from typing import TextIO

from colorama import init

from prompt_ttt.constants import FIELD_WIDTHS, VALID_LOG_METHODS
from prompt_ttt.utils.logger_helpers import suppress_console_logging

__all__ = [
    "echo",
    "format_markdown_table",
    "format_metric",
    "format_table_lines",
    "should_use_color",
]

Cell = str | float | int | None

# Initialize colorama once
init(autoreset=True)

# ---------------------------------------------------------------------
# Color support utilities
# ---------------------------------------------------------------------


def should_use_color(mode: str) -> bool:
    """
    Determine whether color output should be used.

    Args:
        mode: One of 'always', 'never', or 'auto'.

    Returns:
        True if color output should be used.
    """
    if mode == "always":
        return True
    if mode == "never":
        return False
    return sys.stdout.isatty()


# ---------------------------------------------------------------------
# Standard message formatters
# ---------------------------------------------------------------------


def echo(
    msg: str,
    style: Callable[[str], str],
    *,
    stream: TextIO | None = None,
    show: bool = True,
    log: bool = True,
    log_method: str | None = None,
) -> None:
    """
    Write a formatted message to a stream and optionally to the logger.

    Args:
        msg: The message text.
        style: The formatting function to apply.
        stream: Output stream (default sys.stdout at call time).
        show: If True, print to terminal.
        log: If True, log the message (requires log_method).
        log_method: Logger method name used when logging.

    Raises:
        ValueError: If log=True without log_method, or log_method is invalid.
    """
    from prompt_ttt.utils.logger_setup import get_logger

    logger = get_logger()
    styled = style(msg)

    if log and not log_method:
        msg_error = "log_method must be provided if log=True"
        raise ValueError(msg_error)

    if log_method and log_method not in VALID_LOG_METHODS:
        msg_error = f"Invalid log_method: {log_method}"
        raise ValueError(msg_error)

    log_func = getattr(logger, log_method, None) if log_method else None
    if log and callable(log_func):
        with suppress_console_logging():
            log_func(msg)

    if show:
        out = stream if stream is not None else sys.stdout
        with suppress_console_logging():
            out.write(styled + "\n")
            out.flush()


# ---------------------------------------------------------------------
# Table formatters
# ---------------------------------------------------------------------


def format_metric(value: Cell, digits: int = 3) -> str:
    """Render a table cell: floats rounded, NaN/None as 'n/a'."""
    if value is None:
        return "n/a"
    if isinstance(value, float):
        if math.isnan(value):
            return "n/a"
        return f"{value:.{digits}f}"
    return str(value)


def format_table_lines(headers: Sequence[str], rows: Sequence[Sequence[Cell]]) -> list[str]:
    """
    Format an aligned console table: header, divider and one line per row.

    The first column uses the label width, the others the metric width.
    """
    label_w = FIELD_WIDTHS["label"]
    metric_w = FIELD_WIDTHS["metric"]

    def _line(cells: Sequence[str]) -> str:
        first, *rest = cells
        return (f"{first:<{label_w}} " + " ".join(f"{c:>{metric_w}}" for c in rest)).rstrip()

    header = _line(list(headers))
    lines = [header, "-" * len(header)]
    lines.extend(_line([format_metric(c) for c in row]) for row in rows)
    return lines


def format_markdown_table(headers: Sequence[str], rows: Sequence[Sequence[Cell]]) -> str:
    """Format a markdown table; numeric cells right-aligned."""
    head = "| " + " | ".join(headers) + " |"
    align = "|" + "|".join([":---", *["---:"] * (len(headers) - 1)]) + "|"
    body = ["| " + " | ".join(format_metric(c) for c in row) + " |" for row in rows]
    return "\n".join([head, align, *body]) + "\n"
