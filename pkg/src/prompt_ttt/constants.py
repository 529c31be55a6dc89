"""
Constants for prompt_ttt.

Defines:
- Package metadata
- Typing aliases for modes and strategies
- Anatomy catalog (label codes and precedence)
- Exit codes used by CLI
- Loss, optimizer and scheduler defaults
- Dataset format constants
- Logging configuration
- Environment variable names
"""

# ---------------------------------------------------------------------
# Imports
# ---------------------------------------------------------------------

from pathlib import Path
from types import SimpleNamespace
from typing import Literal

# ---------------------------------------------------------------------
# Typing Aliases
# ---------------------------------------------------------------------

EvalMode = Literal["none", "prompt_ttt", "rot_ttt", "mae_ttt"]
BaselineStrategy = Literal["rotation", "mae"]
Component = Literal["encoder", "prompt_encoder", "dseg", "daux", "rot_head", "recon_head"]
ColorMode = Literal["auto", "always", "never"]
Domain = Literal["source", "target"]

# ---------------------------------------------------------------------
# Package Info
# ---------------------------------------------------------------------

PACKAGE_NAME = "prompt_ttt"
DEFAULT_ENCODING = "utf-8"

# ---------------------------------------------------------------------
# Valid Inputs
# ---------------------------------------------------------------------

VALID_EVAL_MODES = ("none", "prompt_ttt", "rot_ttt", "mae_ttt")
VALID_COMPONENTS = ("encoder", "prompt_encoder", "dseg", "daux", "rot_head", "recon_head")
VALID_COLOR_MODES = ("auto", "always", "never")
VALID_DOMAINS = ("source", "target")
VALID_ROTATIONS = (0, 90, 180, 270)
VALID_LOG_METHODS = {"debug", "info", "warning", "error", "exception"}

LOG_METHODS = SimpleNamespace(
    DEBUG="debug",
    INFO="info",
    WARNING="warning",
    ERROR="error",
    EXCEPTION="exception",
)

# ---------------------------------------------------------------------
# Anatomy Catalog
# ---------------------------------------------------------------------

ANATOMY_CODES: dict[str, int] = {
    "bolus": 1,
    "pharynx": 2,
    "trachea": 3,
    "epiglottis": 4,
    "mandible": 5,
    "C1": 6,
    "C2": 7,
    "C3": 8,
    "C4": 9,
    "C5": 10,
    "C6": 11,
    "C7": 12,
}
ANATOMY_NAMES: dict[int, str] = {code: name for name, code in ANATOMY_CODES.items()}
NUM_ANATOMIES = len(ANATOMY_CODES)
BACKGROUND_CODE = 0

# Highest precedence first; the label map shows the first anatomy covering a pixel.
LABEL_PRECEDENCE: tuple[int, ...] = (1, 4, 2, 3, 5, 6, 7, 8, 9, 10, 11, 12)

# ---------------------------------------------------------------------
# Exit Codes
# ---------------------------------------------------------------------

EXIT_SUCCESS = 0
EXIT_ERROR = 1
EXIT_INVALID_USAGE = 2
EXIT_CANCELLED = 130

# ---------------------------------------------------------------------
# Loss and numerical defaults
# ---------------------------------------------------------------------

DICE_EPS: float = 1e-5
BCE_CLAMP: float = 1e-7
DEFAULT_LAMBDA: float = 0.2
DEFAULT_THRESHOLD: float = 0.5
HD_PERCENTILE: float = 95.0

ADAM_BETAS: tuple[float, float] = (0.9, 0.999)
ADAM_EPS: float = 1e-8

DEFAULT_TRAIN_LR: float = 1e-3
DEFAULT_TTT_LR: float = 6e-5
DEFAULT_BATCH_SIZE: int = 2
DEFAULT_LR_DROP_FACTOR: float = 0.8
DEFAULT_SATURATION_PATIENCE: int = 20
DEFAULT_SATURATION_TOLERANCE: float = 1e-3
DEFAULT_BOX_JITTER: float = 0.05
DEFAULT_PROMPT_ANATOMY = "pharynx"

FD_RELATIVE_FLOOR: float = 1e-3

# ---------------------------------------------------------------------
# Dataset and checkpoint format
# ---------------------------------------------------------------------

DATASET_FORMAT_VERSION = 1
CHECKPOINT_FORMAT_VERSION = 1
MANIFEST_FILE_NAME = "manifest.json"
VIDEO_METADATA_FILE_NAME = "metadata.json"
CHECKPOINT_FILE_NAME = "checkpoint.pt"
CHECKPOINT_SIDECAR_NAME = "checkpoint.json"
RESOLVED_CONFIG_NAME = "resolved_config.json"
SPLIT_TRAIN_RATIO: float = 0.8
SOURCE_SUBDIR = "source"
TARGET_SUBDIR = "target"

# ---------------------------------------------------------------------
# Output Constants
# ---------------------------------------------------------------------

METRIC_COLUMNS: tuple[str, ...] = ("dsc", "hd95", "asd", "sensitivity")

FIELD_WIDTHS = {
    "label": 22,
    "metric": 16,
}

# Published reference numbers, shown next to desk-scale results and never asserted.
REFERENCE_TABLE_I: dict[str, tuple[float, float, float, float]] = {
    "none": (0.841, 10.323, 2.117, 0.833),
    "rot_ttt": (0.852, 9.109, 1.965, 0.851),
    "mae_ttt": (0.864, 9.264, 1.884, 0.860),
    "prompt_ttt": (0.881, 8.231, 1.532, 0.885),
}
REFERENCE_TABLE_II_TTT: dict[str, float] = {
    "bolus": 0.865,
    "pharynx": 0.881,
    "trachea": 0.864,
    "epiglottis": 0.852,
    "mandible": 0.873,
    "C1": 0.863,
    "C2": 0.861,
    "C3": 0.878,
    "C4": 0.879,
    "C5": 0.860,
    "C6": 0.889,
    "C7": 0.866,
    "Average": 0.868,
}
REFERENCE_TABLE_III: dict[int, tuple[float, float, float, float]] = {
    1: (0.881, 8.231, 1.532, 0.885),
    3: (0.875, 9.332, 1.784, 0.877),
    5: (0.867, 9.994, 1.987, 0.874),
}

# ---------------------------------------------------------------------
# Logging (static pieces)
# ---------------------------------------------------------------------

LOG_FILE_NAME = "prompt_ttt.log"
LOG_FORMAT = "[%(asctime)s] [%(levelname)s] [%(env)s] %(message)s"
DEFAULT_LOG_ROOT = Path("logs")

# ---------------------------------------------------------------------
# Environment Variable Names
# ---------------------------------------------------------------------

ENV_ENVIRONMENT = "PROMPT_TTT_ENV"
ENV_LOG_MAX_BYTES = "PROMPT_TTT_LOG_MAX_BYTES"
ENV_LOG_BACKUP_COUNT = "PROMPT_TTT_LOG_BACKUP_COUNT"
ENV_LOG_LEVEL = "PROMPT_TTT_LOG_LEVEL"
ENV_DEBUG_ENV_LOAD = "PROMPT_TTT_DEBUG_ENV_LOAD"
ENV_COLOR_MODE = "PROMPT_TTT_COLOR_MODE"
ENV_CONFIG_PREFIX = "PROMPT_TTT_CFG__"

# ---------------------------------------------------------------------
# __all__
# ---------------------------------------------------------------------

__all__ = [
    "ADAM_BETAS",
    "ADAM_EPS",
    "ANATOMY_CODES",
    "ANATOMY_NAMES",
    "BACKGROUND_CODE",
    "BCE_CLAMP",
    "CHECKPOINT_FILE_NAME",
    "CHECKPOINT_FORMAT_VERSION",
    "CHECKPOINT_SIDECAR_NAME",
    "DATASET_FORMAT_VERSION",
    "DEFAULT_BATCH_SIZE",
    "DEFAULT_BOX_JITTER",
    "DEFAULT_ENCODING",
    "DEFAULT_LAMBDA",
    "DEFAULT_LOG_ROOT",
    "DEFAULT_LR_DROP_FACTOR",
    "DEFAULT_PROMPT_ANATOMY",
    "DEFAULT_SATURATION_PATIENCE",
    "DEFAULT_SATURATION_TOLERANCE",
    "DEFAULT_THRESHOLD",
    "DEFAULT_TRAIN_LR",
    "DEFAULT_TTT_LR",
    "DICE_EPS",
    "ENV_COLOR_MODE",
    "ENV_CONFIG_PREFIX",
    "ENV_DEBUG_ENV_LOAD",
    "ENV_ENVIRONMENT",
    "ENV_LOG_BACKUP_COUNT",
    "ENV_LOG_LEVEL",
    "ENV_LOG_MAX_BYTES",
    "EXIT_CANCELLED",
    "EXIT_ERROR",
    "EXIT_INVALID_USAGE",
    "EXIT_SUCCESS",
    "FD_RELATIVE_FLOOR",
    "FIELD_WIDTHS",
    "HD_PERCENTILE",
    "LABEL_PRECEDENCE",
    "LOG_FILE_NAME",
    "LOG_FORMAT",
    "LOG_METHODS",
    "MANIFEST_FILE_NAME",
    "METRIC_COLUMNS",
    "NUM_ANATOMIES",
    "PACKAGE_NAME",
    "REFERENCE_TABLE_I",
    "REFERENCE_TABLE_II_TTT",
    "REFERENCE_TABLE_III",
    "RESOLVED_CONFIG_NAME",
    "SOURCE_SUBDIR",
    "SPLIT_TRAIN_RATIO",
    "TARGET_SUBDIR",
    "VALID_COLOR_MODES",
    "VALID_COMPONENTS",
    "VALID_DOMAINS",
    "VALID_EVAL_MODES",
    "VALID_LOG_METHODS",
    "VALID_ROTATIONS",
    "VIDEO_METADATA_FILE_NAME",
    "BaselineStrategy",
    "ColorMode",
    "Component",
    "Domain",
    "EvalMode",
]
