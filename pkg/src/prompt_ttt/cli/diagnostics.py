"""Diagnostics utilities for user-facing CLI debug output.

Provides human-readable runtime diagnostics when the `--debug` flag is passed.

Behavior:
    - Output is printed directly to stdout (if show=True).
    - ANSI coloring is applied based on `--color` flag or terminal support.
    - Output includes CLI arguments, the resolved experiment config and .env file(s).
    - Output is always logged (level DEBUG).

Functions:
    print_debug_diagnostics(): Print CLI args, resolved config and .env context.
    print_dotenv_debug(): Print loaded .env file content (via settings).
"""

# ---------------------------------------------------------------------
# Imports
# ---------------------------------------------------------------------

from __future__ import annotations

import json
import os
from argparse import Namespace

from dotenv import dotenv_values

from prompt_ttt.config import ExperimentConfig, config_to_dict
from prompt_ttt.constants import ENV_CONFIG_PREFIX, ENV_DEBUG_ENV_LOAD
from prompt_ttt.settings import resolve_dotenv_path
from prompt_ttt.utils.formatter import echo
from prompt_ttt.utils.logger_styles import format_debug

__all__ = [
    "print_debug_diagnostics",
    "print_dotenv_debug",
]

# ---------------------------------------------------------------------
# Diagnostics Functions
# ---------------------------------------------------------------------


def _debug(message: str, *, use_color: bool, show: bool, log: bool = True) -> None:
    echo(
        message,
        style=lambda msg: format_debug(msg, use_color=use_color),
        show=show,
        log=log,
        log_method="debug",
    )


def print_debug_diagnostics(
    args: Namespace,
    *,
    config: ExperimentConfig | None = None,
    use_color: bool = False,
    show: bool = True,
) -> None:
    """
    Print structured diagnostics when `--debug` is active.

    Includes:
    - CLI arguments as parsed
    - PROMPT_TTT_CFG__* overrides present in the environment
    - The resolved experiment config, if available
    - Loaded .env file details

    Args:
        args: Parsed CLI arguments (argparse.Namespace)
        config: Resolved experiment config
        use_color: Whether to apply ANSI formatting
        show: If True, print to terminal; always logged.
    """
    _debug("=== DEBUG DIAGNOSTICS ===", use_color=use_color, show=show)
    _debug("Parsed args:", use_color=use_color, show=show)
    for key, value in sorted(vars(args).items()):
        _debug(f"  {key:<20} = {value}", use_color=use_color, show=show)

    _debug(
        f"{ENV_DEBUG_ENV_LOAD} = {os.getenv(ENV_DEBUG_ENV_LOAD, '0')}",
        use_color=use_color,
        show=show,
    )
    overrides = sorted(k for k in os.environ if k.startswith(ENV_CONFIG_PREFIX))
    _debug(f"Config overrides from env: {overrides or 'none'}", use_color=use_color, show=show)

    if config is not None:
        _debug("Resolved config:", use_color=use_color, show=show)
        for line in json.dumps(config_to_dict(config), indent=2, sort_keys=True).splitlines():
            _debug(f"  {line}", use_color=use_color, show=show)

    _debug("Loaded .env file(s):", use_color=use_color, show=show)
    print_dotenv_debug(use_color=use_color, show=show)
    _debug("=== END DEBUG DIAGNOSTICS ===", use_color=use_color, show=show)


def print_dotenv_debug(*, use_color: bool = False, show: bool = True) -> None:
    """
    Print details of the resolved .env file and its contents.

    Intended for CLI `--debug` output (diagnostics only).

    Args:
        use_color: Whether to apply ANSI formatting.
        show: If True, print to terminal; always logged.
    """
    dotenv_path = resolve_dotenv_path()
    _debug("=== DOTENV DEBUG ===", use_color=use_color, show=show, log=False)

    if not dotenv_path:
        _debug("No .env file found or resolved.", use_color=use_color, show=show)
        _debug(
            "Environment variables may only be coming from the OS.",
            use_color=use_color,
            show=show,
        )
        _debug("=== END DOTENV DEBUG ===", use_color=use_color, show=show)
        return

    _debug(f"Selected .env file: {dotenv_path}", use_color=use_color, show=show)
    try:
        values = dotenv_values(dotenv_path=dotenv_path)
        if not values:
            _debug(
                ".env file exists but is empty or contains no key-value pairs.",
                use_color=use_color,
                show=show,
            )
        else:
            pairs_str = ", ".join(f"{key}={value}" for key, value in values.items())
            _debug(f"Loaded key-value pairs: {pairs_str}", use_color=use_color, show=show)
    except (OSError, UnicodeDecodeError) as exc:
        _debug(f"Failed to read .env file: {exc}", use_color=use_color, show=show)

    _debug("=== END DOTENV DEBUG ===", use_color=use_color, show=show)
