"""Error taxonomy for prompt_ttt.

Every error raised on purpose by the library derives from `PromptTTTError`
and from the closest builtin, so callers may catch either.

Usage/configuration errors (mapped to exit code 2 by the CLI) are grouped
under `USAGE_ERRORS`.
"""

from __future__ import annotations

__all__ = [
    "USAGE_ERRORS",
    "AdaptationError",
    "ConfigurationError",
    "DatasetFormatError",
    "OracleError",
    "PromptTTTError",
    "SamplingError",
    "ShapeError",
    "TrainingError",
    "ValidationError",
]


class PromptTTTError(Exception):
    """Base class for all prompt_ttt errors."""


class ConfigurationError(PromptTTTError, ValueError):
    """Inconsistent or unknown configuration."""


class ShapeError(PromptTTTError, ValueError):
    """Array dimensions do not match what an operation requires."""


class ValidationError(PromptTTTError, ValueError):
    """Input values violate a documented invariant."""


class SamplingError(PromptTTTError, ValueError):
    """A mask has too few foreground pixels to sample prompts from."""


class DatasetFormatError(PromptTTTError, ValueError):
    """On-disk dataset or checkpoint is missing, corrupt or of another version."""


class TrainingError(PromptTTTError, RuntimeError):
    """Source training produced a non-finite loss."""


class AdaptationError(PromptTTTError, RuntimeError):
    """Test-time adaptation produced a non-finite loss."""


class OracleError(PromptTTTError, RuntimeError):
    """Finite-difference gradient oracle was misused or evaluated non-finite."""


USAGE_ERRORS: tuple[type[PromptTTTError], ...] = (
    ConfigurationError,
    DatasetFormatError,
)
