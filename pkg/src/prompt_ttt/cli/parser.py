"""CLI argument parser definition for prompt_ttt.

Defines the main ArgumentParser used by the CLI.

Responsibilities:
    - Define the subcommands: synth, train, eval, ablate-prompts, report.
    - Attach the shared options (--config, --seed, --out, --color, --verbose,
      --debug) to every subcommand.
    - Attach custom validators (threshold_range, n_points_list).
    - Attach --version.
    - Enable argcomplete tab completion.

Used by:
    cli_main.py to parse CLI arguments.

Functions:
    create_parser(): Returns the configured ArgumentParser instance.
"""

# ---------------------------------------------------------------------
# Imports
# ---------------------------------------------------------------------

import argparse

from prompt_ttt.cli.args import (
    ARG_CHECKPOINT,
    ARG_COLOR,
    ARG_CONFIG,
    ARG_DATA,
    ARG_EPOCHS,
    ARG_MODE,
    ARG_N_POINTS,
    ARG_OUT,
    ARG_SEED,
    ARG_THRESHOLD,
    CMD_ABLATE,
    CMD_EVAL,
    CMD_REPORT,
    CMD_SYNTH,
    CMD_TRAIN,
    n_points_list,
    non_negative_int,
    threshold_range,
)
from prompt_ttt.cli.handlers import get_version
from prompt_ttt.constants import VALID_COLOR_MODES, VALID_DOMAINS, VALID_EVAL_MODES

__all__ = ["create_parser"]

# ---------------------------------------------------------------------
# Shared options
# ---------------------------------------------------------------------


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        ARG_CONFIG,
        default=None,
        help="JSON experiment config (defaults <- file <- PROMPT_TTT_CFG__* env <- flags).",
    )
    common.add_argument(
        ARG_SEED,
        type=non_negative_int,
        default=None,
        help="Global seed; overrides the synth, trainer and ttt seeds.",
    )
    common.add_argument(
        ARG_OUT,
        default=None,
        help="Run directory (default: output.out_dir from the config).",
    )
    common.add_argument(
        ARG_COLOR,
        choices=list(VALID_COLOR_MODES),
        default=None,
        help="Control color output.",
    )
    common.add_argument(
        "--verbose",
        "-v",
        dest="verbose",
        action="store_true",
        default=False,
        help="Enable console output (stdout/stderr). Default is off.",
    )
    common.add_argument(
        "--debug",
        action="store_true",
        help="Enable debug diagnostics output.",
    )
    return common


def _data_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        ARG_DATA,
        default=None,
        help="Dataset root written by `synth` (default: <out>/data).",
    )


def _checkpoint_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        ARG_CHECKPOINT,
        default=None,
        help="Checkpoint directory written by `train` (default: <out>/checkpoint).",
    )
    parser.add_argument(
        "--domain",
        choices=list(VALID_DOMAINS),
        default=None,
        help="Evaluate on the shifted target set (default) or the source test split.",
    )
    parser.add_argument(
        ARG_THRESHOLD,
        type=threshold_range,
        default=None,
        help="Binarization threshold for predicted probabilities (0.0, 1.0].",
    )


# ---------------------------------------------------------------------
# Parser Creation
# ---------------------------------------------------------------------


def create_parser() -> argparse.ArgumentParser:
    """
    Build and return the CLI ArgumentParser.

    Subcommands:
    - synth: Generate the source dataset, the shifted target set and the split.
    - train: Source training; writes the checkpoint and train_history.csv.
    - eval: Optional test-time adaptation per target video, then metrics.
    - ablate-prompts: Prompt-TTT evaluation once per point-prompt count.
    - report: Merge CSVs of several runs into seed-mean +/- std tables.

    Returns:
        argparse.ArgumentParser: The configured argument parser.
    """
    parser = argparse.ArgumentParser(
        prog="prompt-ttt",
        description="Prompt-guided test-time training for promptable segmentation.",
        epilog="""Examples:
            prompt-ttt synth --out runs/s0
            prompt-ttt train --out runs/s0 --epochs 20
            prompt-ttt eval --out runs/s0 --mode prompt_ttt
            prompt-ttt ablate-prompts --out runs/s0 --n-points 1,3,5
            prompt-ttt report runs/s0 runs/s1 --out runs/report
            PROMPT_TTT_CFG__ttt__loops=5 prompt-ttt eval --out runs/s0 --mode prompt_ttt
        """,
        formatter_class=argparse.RawTextHelpFormatter,
    )
    common = _common_options()
    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND")

    # ---------------------------------------------------------------------
    # synth
    # ---------------------------------------------------------------------

    subparsers.add_parser(
        CMD_SYNTH,
        parents=[common],
        help="Generate synthetic source/target videos and the 8:2 split.",
    )

    # ---------------------------------------------------------------------
    # train
    # ---------------------------------------------------------------------

    train = subparsers.add_parser(
        CMD_TRAIN,
        parents=[common],
        help="Train on the source split and write a checkpoint.",
    )
    _data_options(train)
    train.add_argument(
        ARG_EPOCHS,
        type=non_negative_int,
        default=None,
        help="Override trainer.epochs (0 writes the initialization).",
    )

    # ---------------------------------------------------------------------
    # eval
    # ---------------------------------------------------------------------

    evaluate = subparsers.add_parser(
        CMD_EVAL,
        parents=[common],
        help="Adapt per test video (optional) and evaluate all anatomies.",
    )
    _data_options(evaluate)
    _checkpoint_options(evaluate)
    evaluate.add_argument(
        ARG_MODE,
        choices=list(VALID_EVAL_MODES),
        default=None,
        help="Adaptation before inference: none, prompt_ttt, rot_ttt or mae_ttt.",
    )
    evaluate.add_argument(
        "--oracle",
        action="store_true",
        default=None,
        help="Replace predictions with ground truth (plumbing check).",
    )

    # ---------------------------------------------------------------------
    # ablate-prompts
    # ---------------------------------------------------------------------

    ablate = subparsers.add_parser(
        CMD_ABLATE,
        parents=[common],
        help="Prompt-TTT evaluation per number of point prompts.",
    )
    _data_options(ablate)
    _checkpoint_options(ablate)
    ablate.add_argument(
        ARG_N_POINTS,
        type=n_points_list,
        default=None,
        help="Comma-separated point-prompt counts (default: ablation.n_points_list).",
    )

    # ---------------------------------------------------------------------
    # report
    # ---------------------------------------------------------------------

    report = subparsers.add_parser(
        CMD_REPORT,
        parents=[common],
        help="Merge the CSVs of several run directories.",
    )
    report.add_argument(
        "run_dirs",
        nargs="*",
        help="Run directories (typically one per seed).",
    )

    # Enable argcomplete
    try:
        import argcomplete

        argcomplete.autocomplete(parser)
    except ImportError:
        pass

    # ---------------------------------------------------------------------
    # Version Option
    # ---------------------------------------------------------------------

    parser.add_argument(
        "--version",
        action="version",
        version=get_version(),
    )

    return parser
