"""Main CLI entry point for prompt_ttt.

Coordinates the full CLI workflow:

- Builds the CLI argument parser.
- Parses command-line arguments.
- Executes the full CLI lifecycle via handle_cli_workflow().
- Acts as the main entry point when invoked via:
    python -m prompt_ttt
    prompt-ttt [command] [args]

Functions:
    main(): The main CLI entry function.
"""

# ---------------------------------------------------------------------
# Imports
# ---------------------------------------------------------------------

import sys

from prompt_ttt.cli.handlers import resolve_effective_color_mode
from prompt_ttt.cli.parser import create_parser
from prompt_ttt.cli.utils_runner import auto_enable_debug, handle_cli_workflow
from prompt_ttt.constants import EXIT_SUCCESS
from prompt_ttt.utils.formatter import should_use_color

__all__ = ["main"]

# ---------------------------------------------------------------------
# Public API
# ---------------------------------------------------------------------


def main() -> None:
    """
    Main CLI entry function.

    - Parses CLI arguments (usage errors exit with code 2 from argparse).
    - Prints help when no subcommand is given.
    - Executes the CLI workflow and handles final exit.
    """
    parser = create_parser()
    args = parser.parse_args()

    if not args.command:
        parser.print_help()
        sys.exit(EXIT_SUCCESS)

    # Initial color mode before loading .env (used for early output)
    color_mode = resolve_effective_color_mode(args.color)
    use_color = should_use_color(color_mode)

    # Debug flag override via env
    auto_enable_debug(args)

    exit_code = handle_cli_workflow(args=args, use_color=use_color)
    sys.exit(exit_code)
