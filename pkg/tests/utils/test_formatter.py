"""
Unit tests for formatter.py in prompt_ttt.utils.
Covers color detection, echo routing, metric cells and table rendering.
"""

# ---------------------------------------------------------------------
# Imports
# ---------------------------------------------------------------------

import logging
import sys
from collections.abc import Callable
from io import StringIO

import pytest

from prompt_ttt.constants import FIELD_WIDTHS
from prompt_ttt.utils import formatter as F
from prompt_ttt.utils.logger_styles import format_error, format_info

# ---------------------------------------------------------------------
# should_use_color
# ---------------------------------------------------------------------


def test_should_use_color_always() -> None:
    assert F.should_use_color("always") is True


def test_should_use_color_never() -> None:
    assert F.should_use_color("never") is False


def test_should_use_color_auto(monkeypatch: pytest.MonkeyPatch) -> None:
    """Test 'auto' mode reflects sys.stdout.isatty()."""
    monkeypatch.setattr(sys.stdout, "isatty", lambda: True)
    assert F.should_use_color("auto") is True
    monkeypatch.setattr(sys.stdout, "isatty", lambda: False)
    assert F.should_use_color("auto") is False


# ---------------------------------------------------------------------
# echo
# ---------------------------------------------------------------------


def test_echo_writes_styled_message_to_stream() -> None:
    stream = StringIO()
    F.echo("hello", lambda m: format_info(m, use_color=False), stream=stream, log=False)
    assert stream.getvalue() == "[INFO] hello\n"


def test_echo_show_false_prints_nothing(echo_output: Callable[[], str]) -> None:
    F.echo("quiet", lambda m: m, show=False, log=False)
    assert echo_output() == ""


def test_echo_logs_message(debug_logger: logging.Logger, log_stream: StringIO) -> None:
    F.echo("logged once", lambda m: m, show=False, log=True, log_method="warning")
    assert "[WARNING] logged once" in log_stream.getvalue()


def test_echo_requires_log_method_when_logging() -> None:
    with pytest.raises(ValueError, match="log_method must be provided"):
        F.echo("x", lambda m: m, show=False, log=True)


def test_echo_rejects_unknown_log_method() -> None:
    with pytest.raises(ValueError, match="Invalid log_method"):
        F.echo("x", lambda m: m, show=False, log=True, log_method="shout")


def test_echo_error_style_goes_to_stderr(capsys: pytest.CaptureFixture[str]) -> None:
    F.echo("boom", lambda m: format_error(m, use_color=False), stream=sys.stderr, log=False)
    captured = capsys.readouterr()
    assert captured.out == ""
    assert "[ERROR] boom" in captured.err


# ---------------------------------------------------------------------
# format_metric
# ---------------------------------------------------------------------


@pytest.mark.parametrize(
    ("value", "expected"),
    [
        (0.91234, "0.912"),
        (1.0, "1.000"),
        (float("nan"), "n/a"),
        (None, "n/a"),
        (3, "3"),
        ("Average", "Average"),
    ],
)
def test_format_metric(value: F.Cell, expected: str) -> None:
    assert F.format_metric(value) == expected


def test_format_metric_digits() -> None:
    assert F.format_metric(2.71828, digits=1) == "2.7"


# ---------------------------------------------------------------------
# Tables
# ---------------------------------------------------------------------


def test_format_table_lines_alignment() -> None:
    lines = F.format_table_lines(["anatomy", "DSC"], [["pharynx", 0.8], ["Average", float("nan")]])
    assert len(lines) == 4
    assert lines[1] == "-" * len(lines[0])
    assert lines[2].startswith("pharynx".ljust(FIELD_WIDTHS["label"]))
    assert lines[2].endswith("0.800")
    assert lines[3].endswith("n/a")


def test_format_markdown_table() -> None:
    text = F.format_markdown_table(["mode", "DSC"], [["none", 0.5]])
    assert text.splitlines() == ["| mode | DSC |", "|:---|---:|", "| none | 0.500 |"]
    assert text.endswith("\n")
