"""
Experiment configuration.

Resolution order, lowest to highest priority:

1. Dataclass defaults.
2. A JSON file (`--config`).
3. Environment overrides `PROMPT_TTT_CFG__<section>__<field>=<json>`.
4. Explicit CLI flags (applied by the CLI after loading).

Unknown sections or keys are rejected with the closest valid name, found
with RapidFuzz. Values are type-checked against the dataclass annotations.

Functions:
    load_config(): Resolve an ExperimentConfig from file and environment.
    config_from_dict(): Build and validate an ExperimentConfig from a mapping.
    config_to_dict(): Plain-JSON view of a config.
    with_seed(): Copy of a config with every seed set to one value.
    write_resolved_config(): Echo the resolved config into an output directory.
    suggest_key(): Closest valid name for a misspelled key.
"""

# ---------------------------------------------------------------------
# Imports
# ---------------------------------------------------------------------

from __future__ import annotations

import dataclasses
import json
import typing
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

from rapidfuzz import fuzz, process

from prompt_ttt.constants import (
    ANATOMY_CODES,
    DEFAULT_ENCODING,
    RESOLVED_CONFIG_NAME,
    VALID_DOMAINS,
    VALID_EVAL_MODES,
)
from prompt_ttt.exceptions import ConfigurationError
from prompt_ttt.settings import get_config_overrides
from prompt_ttt.types import (
    AblationConfig,
    ArchConfig,
    EvalConfig,
    OutputConfig,
    SynthConfig,
    TrainConfig,
    TTTConfig,
)

__all__ = [
    "ExperimentConfig",
    "config_from_dict",
    "config_to_dict",
    "load_config",
    "suggest_key",
    "with_seed",
    "write_resolved_config",
]

# ---------------------------------------------------------------------
# Message Constants
# ---------------------------------------------------------------------

MSG_UNKNOWN_KEY = "Unknown config key {path!r}{hint}."
MSG_HINT = "; did you mean {suggestion!r}?"
MSG_TYPE = "Config key {path!r} expects {expected}, got {value!r}."
MSG_NOT_OBJECT = "Config section {path!r} must be a JSON object."
MSG_FILE_MISSING = "Config file not found: {path}"
MSG_FILE_INVALID = "Config file {path} is not valid JSON: {reason}"
MSG_EVAL = "Invalid eval config: {reason}."
MSG_ABLATION = "Invalid ablation config: n_points_list must be non-empty positive integers."

SUGGESTION_CUTOFF = 60.0

# ---------------------------------------------------------------------
# Config dataclass
# ---------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    seed: int = 0
    synth: SynthConfig = field(default_factory=SynthConfig)
    model: ArchConfig = field(default_factory=ArchConfig)
    trainer: TrainConfig = field(default_factory=TrainConfig)
    ttt: TTTConfig = field(default_factory=TTTConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    ablation: AblationConfig = field(default_factory=AblationConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def validate(self) -> None:
        self.model.validate()
        self.trainer.validate()
        self.ttt.validate()
        self.synth.validate()
        if self.synth.downsample != self.model.downsample:
            raise ConfigurationError(
                f"synth.downsample ({self.synth.downsample}) must equal "
                f"model.downsample ({self.model.downsample})."
            )
        if self.eval.mode not in VALID_EVAL_MODES:
            raise ConfigurationError(
                MSG_EVAL.format(reason=f"mode must be one of {VALID_EVAL_MODES}")
            )
        if self.eval.domain not in VALID_DOMAINS:
            raise ConfigurationError(
                MSG_EVAL.format(reason=f"domain must be one of {VALID_DOMAINS}")
            )
        if self.eval.prompt_anatomy not in ANATOMY_CODES:
            raise ConfigurationError(
                MSG_EVAL.format(reason=f"prompt_anatomy must be one of {list(ANATOMY_CODES)}")
            )
        if not 0.0 < self.eval.threshold <= 1.0:
            raise ConfigurationError(MSG_EVAL.format(reason="threshold must lie in (0, 1]"))
        if not self.ablation.n_points_list or any(n < 1 for n in self.ablation.n_points_list):
            raise ConfigurationError(MSG_ABLATION)


# ---------------------------------------------------------------------
# Key suggestions
# ---------------------------------------------------------------------


def suggest_key(key: str, valid: typing.Iterable[str]) -> str | None:
    """Closest valid name by RapidFuzz ratio, or None below the cutoff."""
    match = process.extractOne(key, list(valid), scorer=fuzz.ratio, score_cutoff=SUGGESTION_CUTOFF)
    return None if match is None else str(match[0])


def _unknown_key(path: str, key: str, valid: typing.Iterable[str]) -> ConfigurationError:
    suggestion = suggest_key(key, valid)
    hint = MSG_HINT.format(suggestion=suggestion) if suggestion else ""
    return ConfigurationError(MSG_UNKNOWN_KEY.format(path=path, hint=hint))


# ---------------------------------------------------------------------
# Typed construction
# ---------------------------------------------------------------------


def _coerce(value: Any, annotation: Any, path: str) -> Any:
    origin = typing.get_origin(annotation)
    if dataclasses.is_dataclass(annotation):
        if not isinstance(value, dict):
            raise ConfigurationError(MSG_NOT_OBJECT.format(path=path))
        return _build(annotation, value, path)  # type: ignore[arg-type]
    if origin is list:
        (item_type,) = typing.get_args(annotation)
        if not isinstance(value, list):
            raise ConfigurationError(MSG_TYPE.format(path=path, expected="a list", value=value))
        return [_coerce(item, item_type, f"{path}[{i}]") for i, item in enumerate(value)]
    if annotation is bool:
        if not isinstance(value, bool):
            raise ConfigurationError(MSG_TYPE.format(path=path, expected="a boolean", value=value))
        return value
    if annotation is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigurationError(MSG_TYPE.format(path=path, expected="an integer", value=value))
        return value
    if annotation is float:
        if isinstance(value, bool) or not isinstance(value, int | float):
            raise ConfigurationError(MSG_TYPE.format(path=path, expected="a number", value=value))
        return float(value)
    if annotation is str:
        if not isinstance(value, str):
            raise ConfigurationError(MSG_TYPE.format(path=path, expected="a string", value=value))
        return value
    return value


def _build(cls: type[Any], data: dict[str, Any], path: str) -> Any:
    hints = typing.get_type_hints(cls)
    names = [f.name for f in dataclasses.fields(cls)]
    for key in data:
        if key not in names:
            raise _unknown_key(f"{path}.{key}" if path else key, key, names)
    kwargs = {
        key: _coerce(value, hints[key], f"{path}.{key}" if path else key)
        for key, value in data.items()
    }
    return cls(**kwargs)


def _merge(base: dict[str, Any], update: dict[str, Any]) -> dict[str, Any]:
    merged = dict(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def config_to_dict(config: ExperimentConfig) -> dict[str, Any]:
    return asdict(config)


def config_from_dict(data: dict[str, Any]) -> ExperimentConfig:
    """
    Build an ExperimentConfig from a (partial) mapping over the defaults.

    Raises:
        ConfigurationError: On unknown keys, wrong types or invalid values.
    """
    merged = _merge(config_to_dict(ExperimentConfig()), data)
    config: ExperimentConfig = _build(ExperimentConfig, merged, "")
    config.validate()
    return config


def _env_layer() -> dict[str, Any]:
    layer: dict[str, Any] = {}
    for section, fields in get_config_overrides().items():
        if section == "":
            layer.update(fields)
        else:
            layer.setdefault(section, {}).update(fields)
    return layer


def load_config(path: Path | str | None = None, *, use_env: bool = True) -> ExperimentConfig:
    """
    Resolve defaults <- JSON file <- environment overrides.

    Raises:
        ConfigurationError: Missing/invalid file, unknown keys, wrong types or values.
    """
    data: dict[str, Any] = {}
    if path is not None:
        file_path = Path(path)
        if not file_path.is_file():
            raise ConfigurationError(MSG_FILE_MISSING.format(path=file_path))
        try:
            loaded = json.loads(file_path.read_text(encoding=DEFAULT_ENCODING))
        except json.JSONDecodeError as exc:
            raise ConfigurationError(MSG_FILE_INVALID.format(path=file_path, reason=exc)) from exc
        if not isinstance(loaded, dict):
            raise ConfigurationError(MSG_NOT_OBJECT.format(path=str(file_path)))
        data = loaded
    if use_env:
        data = _merge(data, _env_layer())
    return config_from_dict(data)


def with_seed(config: ExperimentConfig, seed: int) -> ExperimentConfig:
    """Copy of `config` whose global, synth, trainer and ttt seeds all equal `seed`."""
    return dataclasses.replace(
        config,
        seed=seed,
        synth=dataclasses.replace(config.synth, seed=seed),
        trainer=dataclasses.replace(config.trainer, seed=seed),
        ttt=dataclasses.replace(config.ttt, seed=seed),
    )


def write_resolved_config(config: ExperimentConfig, directory: Path | str) -> Path:
    """Write resolved_config.json into `directory` and return its path."""
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    target = root / RESOLVED_CONFIG_NAME
    target.write_text(
        json.dumps(config_to_dict(config), indent=2, sort_keys=True) + "\n",
        encoding=DEFAULT_ENCODING,
    )
    return target
