"""Argument names and argument validators for the prompt_ttt CLI.

Defines:

- CLI argument names used across the CLI components (parser, handlers).
- Custom argument validators (`threshold_range`, `non_negative_int`,
  `n_points_list`).

Used by:
    parser.py, handlers.py

Constants:
    ARG_CONFIG, ARG_SEED, ARG_OUT, ARG_COLOR, ARG_DATA, ARG_CHECKPOINT, ARG_MODE,
    ARG_EPOCHS, ARG_THRESHOLD, ARG_N_POINTS, CMD_SYNTH, CMD_TRAIN, CMD_EVAL,
    CMD_ABLATE, CMD_REPORT, DATA_SUBDIR, CHECKPOINT_SUBDIR, EVAL_SUBDIR, ABLATION_SUBDIR

Functions:
    threshold_range(): Validate that --threshold is a float in (0.0, 1.0].
    non_negative_int(): Validate counts such as --epochs and --seed.
    n_points_list(): Parse a comma-separated list of positive prompt counts.
"""

# ---------------------------------------------------------------------
# Imports
# ---------------------------------------------------------------------

from __future__ import annotations

import argparse

__all__ = [
    "ABLATION_SUBDIR",
    "ARG_CHECKPOINT",
    "ARG_COLOR",
    "ARG_CONFIG",
    "ARG_DATA",
    "ARG_EPOCHS",
    "ARG_MODE",
    "ARG_N_POINTS",
    "ARG_OUT",
    "ARG_SEED",
    "ARG_THRESHOLD",
    "CHECKPOINT_SUBDIR",
    "CMD_ABLATE",
    "CMD_EVAL",
    "CMD_REPORT",
    "CMD_SYNTH",
    "CMD_TRAIN",
    "DATA_SUBDIR",
    "EVAL_SUBDIR",
    "REPORT_FILE_NAME",
    "n_points_list",
    "non_negative_int",
    "threshold_range",
]

# --------------------------------------------------------------------
# CLI Argument Names
# --------------------------------------------------------------------

ARG_CONFIG = "--config"
ARG_SEED = "--seed"
ARG_OUT = "--out"
ARG_COLOR = "--color"
ARG_DATA = "--data"
ARG_CHECKPOINT = "--checkpoint"
ARG_MODE = "--mode"
ARG_EPOCHS = "--epochs"
ARG_THRESHOLD = "--threshold"
ARG_N_POINTS = "--n-points"

CMD_SYNTH = "synth"
CMD_TRAIN = "train"
CMD_EVAL = "eval"
CMD_ABLATE = "ablate-prompts"
CMD_REPORT = "report"

# Run directory layout: <out>/data/{source,target}, <out>/checkpoint,
# <out>/eval/<mode>, <out>/ablation.
DATA_SUBDIR = "data"
CHECKPOINT_SUBDIR = "checkpoint"
EVAL_SUBDIR = "eval"
ABLATION_SUBDIR = "ablation"
REPORT_FILE_NAME = "report.md"

# ---------------------------------------------------------------------
# Argument Validators
# ---------------------------------------------------------------------


def threshold_range(value: str) -> float:
    """
    Validate that the binarization threshold is a float in (0.0, 1.0].

    Raises:
        argparse.ArgumentTypeError: If the value is not a float or out of range.
    """
    try:
        fvalue = float(value)
    except ValueError as exc:
        message = f"Invalid threshold value: {value}"
        raise argparse.ArgumentTypeError(message) from exc

    if not 0.0 < fvalue <= 1.0:
        message = "Threshold must be in (0.0, 1.0]"
        raise argparse.ArgumentTypeError(message)

    return fvalue


def non_negative_int(value: str) -> int:
    try:
        ivalue = int(value)
    except ValueError as exc:
        message = f"Expected an integer, got {value!r}"
        raise argparse.ArgumentTypeError(message) from exc
    if ivalue < 0:
        message = f"Expected a non-negative integer, got {ivalue}"
        raise argparse.ArgumentTypeError(message)
    return ivalue


def n_points_list(value: str) -> list[int]:
    """
    Parse "1,3,5" into [1, 3, 5].

    Raises:
        argparse.ArgumentTypeError: On empty lists, non-integers or counts below 1.
    """
    parts = [part.strip() for part in value.split(",") if part.strip()]
    if not parts:
        message = "Expected a comma-separated list of prompt counts, e.g. 1,3,5"
        raise argparse.ArgumentTypeError(message)
    try:
        counts = [int(part) for part in parts]
    except ValueError as exc:
        message = f"Invalid prompt count list: {value!r}"
        raise argparse.ArgumentTypeError(message) from exc
    if any(n < 1 for n in counts):
        message = "Prompt counts must be >= 1"
        raise argparse.ArgumentTypeError(message)
    return counts
