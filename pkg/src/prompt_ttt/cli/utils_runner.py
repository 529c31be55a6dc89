"""Utilities for orchestrating the prompt_ttt CLI runner.

This module contains the reusable pieces used by the CLI main entry point:

- Managing environment variables and debug mode.
- Displaying environment banners and settings-related info.
- Resolving the experiment config and dispatching the subcommand.
- Mapping outcomes to exit codes (0 success, 1 error, 2 usage/config, 130 cancelled).

Functions:
    auto_enable_debug(): Enable debug if PROMPT_TTT_DEBUG_ENV_LOAD is set.
    exit_code_for(): Exit code for an exception raised by a command.
    handle_cli_workflow(): Execute main CLI logic and handler.
"""

# ---------------------------------------------------------------------
# Imports
# ---------------------------------------------------------------------

import logging
import os
import sys
import traceback
from argparse import Namespace

from prompt_ttt.cli.diagnostics import print_debug_diagnostics
from prompt_ttt.cli.handlers import (
    dispatch,
    get_version,
    resolve_config,
    resolve_effective_color_mode,
)
from prompt_ttt.config import ExperimentConfig
from prompt_ttt.constants import (
    ENV_DEBUG_ENV_LOAD,
    EXIT_CANCELLED,
    EXIT_ERROR,
    EXIT_INVALID_USAGE,
)
from prompt_ttt.exceptions import USAGE_ERRORS
from prompt_ttt.settings import get_environment, is_prod, load_settings
from prompt_ttt.utils.formatter import echo, should_use_color
from prompt_ttt.utils.logger_setup import get_logger, setup_logging, teardown_logger
from prompt_ttt.utils.logger_styles import (
    format_error,
    format_info,
    format_settings,
    format_success,
    format_warning,
)

__all__ = [
    "auto_enable_debug",
    "exit_code_for",
    "handle_cli_workflow",
]

# ---------------------------------------------------------------------
# Environment and Flags
# ---------------------------------------------------------------------


def auto_enable_debug(args: Namespace) -> None:
    """
    Enable debug mode if PROMPT_TTT_DEBUG_ENV_LOAD=1 is set in the environment.

    Modifies `args.debug` in-place if not already set.
    """
    if os.getenv(ENV_DEBUG_ENV_LOAD) == "1" and not getattr(args, "debug", False):
        args.debug = True


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, KeyboardInterrupt):
        return EXIT_CANCELLED
    if isinstance(exc, USAGE_ERRORS):
        return EXIT_INVALID_USAGE
    return EXIT_ERROR


# ---------------------------------------------------------------------
# Main Execution Logic
# ---------------------------------------------------------------------


def handle_cli_workflow(args: Namespace, *, use_color: bool) -> int:
    """
    Perform the main CLI workflow: logging setup, environment loading,
    config resolution, diagnostics and command dispatch.

    Args:
        args (Namespace): Parsed CLI arguments.
        use_color (bool): Whether color output should be used.

    Returns:
        int: Exit code (EXIT_SUCCESS, EXIT_ERROR, EXIT_INVALID_USAGE or EXIT_CANCELLED).
    """
    # Logging Setup
    setup_logging(reset=True, log_level=None, suppress_echo=True, use_color=use_color)

    # Load .env settings
    load_settings(verbose=args.verbose, debug=args.debug)

    # Recompute color mode (after .env)
    color_mode = resolve_effective_color_mode(args.color)
    use_color = should_use_color(color_mode)

    # Finalize logging
    log_level = logging.DEBUG if args.debug else None
    setup_logging(
        reset=True,
        log_level=log_level,
        suppress_echo=not (args.verbose or args.debug),
        use_color=use_color,
    )

    logger = get_logger()
    config: ExperimentConfig | None = None

    try:
        echo(
            f"Using environment: {get_environment()}",
            style=lambda m: format_settings(m, use_color=use_color),
            show=args.verbose,
            log=True,
            log_method="info",
        )

        if is_prod():
            echo(
                "You are running in PROD environment!",
                style=lambda m: format_warning(m, use_color=use_color),
                stream=sys.stderr,
                show=True,
                log=True,
                log_method="warning",
            )

        echo(
            f"prompt_ttt {get_version()} `{args.command}` started",
            style=lambda m: format_info(m, use_color=use_color),
            show=args.verbose,
            log=True,
            log_method="info",
        )

        config = resolve_config(args)

        if args.debug:
            print_debug_diagnostics(args=args, config=config, use_color=use_color, show=True)

        exit_code = dispatch(args, config)

        echo(
            f"`{args.command}` finished. Outputs under: {config.output.out_dir}",
            style=lambda m: format_success(m, use_color=use_color),
            show=args.verbose,
            log=True,
            log_method="info",
        )

    except KeyboardInterrupt as exc:
        echo(
            "Execution interrupted by user.",
            style=lambda msg: format_warning(msg, use_color=use_color),
            stream=sys.stderr,
            show=True,
            log=True,
            log_method="warning",
        )
        return exit_code_for(exc)

    except USAGE_ERRORS as exc:
        echo(
            f"Error: {exc}",
            style=lambda msg: format_error(msg, use_color=use_color),
            stream=sys.stderr,
            show=True,
            log=True,
            log_method="error",
        )
        if args.debug:
            traceback.print_exc()
        return exit_code_for(exc)

    except Exception as exc:
        echo(
            "Unhandled error during CLI execution",
            style=lambda msg: format_error(msg, use_color=use_color),
            stream=sys.stderr,
            show=True,
            log=True,
            log_method="exception",
        )
        echo(
            f"Error: {exc}",
            style=lambda msg: format_error(msg, use_color=use_color),
            stream=sys.stderr,
            show=True,
            log=True,
            log_method="exception",
        )

        if args.debug:
            traceback.print_exc()

        return exit_code_for(exc)

    else:
        return exit_code

    finally:
        teardown_logger(logger)
