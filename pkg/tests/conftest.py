"""
Global pytest fixtures for the prompt_ttt test suite.

This file provides reusable fixtures to:
- Clean up logger state
- Isolate environment variables and .env usage
- Reload settings with optional DOTENV_PATH
- Capture logging and echo output
- Build tiny architectures, configs and seeded synthetic videos
- Run the CLI in a subprocess
"""

from __future__ import annotations

import copy
import importlib
import json
import logging
import os
import tempfile
from collections.abc import Callable, Generator
from io import StringIO
from pathlib import Path
from types import ModuleType
from typing import TYPE_CHECKING, Any, Final

import pytest

from prompt_ttt.core.model import ModelParams, init_params
from prompt_ttt.core.synthdata import generate_video
from prompt_ttt.types import ArchConfig, SynthConfig, TrainConfig, TTTConfig, VideoSequence
from prompt_ttt.utils.logger_setup import get_logger, teardown_logger
from tests.helpers.conftest_helpers import TINY_EXPERIMENT, invoke_cli

if TYPE_CHECKING:
    from _pytest.monkeypatch import MonkeyPatch

# ---------------------------------------------------------------------
# Constants
# ---------------------------------------------------------------------

LOGGER_NAME: Final = "prompt_ttt"

# 64x64 frames keep every forward pass in the millisecond range.
TINY_SIZE: Final = 64

# ---------------------------------------------------------------------
# Logger Isolation
# ---------------------------------------------------------------------


@pytest.fixture(autouse=True)
def clean_prompt_ttt_logger() -> Generator[None, None, None]:
    """
    Clears all logging handlers for 'prompt_ttt' before and after each test
    to avoid log pollution and duplicate handlers.
    """
    logger = get_logger()
    teardown_logger(logger)
    yield
    teardown_logger(logger)


# ---------------------------------------------------------------------
# Environment Cleanup
# ---------------------------------------------------------------------


@pytest.fixture(autouse=True)
def clear_prompt_ttt_env(monkeypatch: MonkeyPatch) -> None:
    """
    Clears all PROMPT_TTT-related env vars before each test to ensure test isolation.
    """
    for var in list(os.environ):
        if var.startswith("PROMPT_TTT_"):
            monkeypatch.delenv(var, raising=False)
    monkeypatch.delenv("DOTENV_PATH", raising=False)
    monkeypatch.setenv("PROMPT_TTT_DEBUG_ENV_LOAD", "0")


# ---------------------------------------------------------------------
# Settings Reload (with optional .env)
# ---------------------------------------------------------------------


@pytest.fixture
def load_fresh_settings(monkeypatch: MonkeyPatch) -> Callable[[Path | None], ModuleType]:
    """
    Reload settings with optional DOTENV_PATH override.
    """

    def _load(dotenv_path: Path | None = None) -> ModuleType:
        if dotenv_path:
            monkeypatch.setenv("DOTENV_PATH", str(dotenv_path.resolve()))
        else:
            monkeypatch.delenv("DOTENV_PATH", raising=False)

        import prompt_ttt.settings as sett

        importlib.reload(sett)
        monkeypatch.setattr(sett, "ROOT_DIR", Path(tempfile.gettempdir()), raising=False)
        sett.load_settings()
        return sett

    return _load


# ---------------------------------------------------------------------
# Patch environment name
# ---------------------------------------------------------------------


@pytest.fixture
def patch_env(monkeypatch: MonkeyPatch) -> Callable[[str], None]:
    """
    Fixture to patch PROMPT_TTT_ENV dynamically.
    Usage: patch_env("UAT")
    """

    def _patch(env_name: str) -> None:
        monkeypatch.setenv("PROMPT_TTT_ENV", env_name)

    return _patch


# ---------------------------------------------------------------------
# Temporary log directory override
# ---------------------------------------------------------------------


@pytest.fixture
def temp_log_dir(monkeypatch: MonkeyPatch) -> Generator[Path, None, None]:
    """
    Provide temporary log directory and patch get_log_dir().
    """
    with tempfile.TemporaryDirectory() as tmpdir:
        tmp_path = Path(tmpdir).resolve()
        monkeypatch.setenv("PROMPT_TTT_ENV", "TEST")

        import prompt_ttt.settings as sett

        importlib.reload(sett)

        monkeypatch.setattr("prompt_ttt.settings.get_log_dir", lambda: tmp_path)
        monkeypatch.setattr("prompt_ttt.utils.logger_setup.get_log_dir", lambda: tmp_path)
        yield tmp_path

        teardown_logger(logging.getLogger(LOGGER_NAME))


# ---------------------------------------------------------------------
# Logging capture
# ---------------------------------------------------------------------


@pytest.fixture
def log_stream() -> Generator[StringIO, None, None]:
    """
    Capture log output to a StringIO stream.
    """
    stream = StringIO()
    handler = logging.StreamHandler(stream)
    formatter = logging.Formatter("[%(levelname)s] %(message)s")
    handler.setFormatter(formatter)

    logger = get_logger()
    logger.addHandler(handler)

    yield stream

    logger.removeHandler(handler)
    handler.close()


@pytest.fixture
def debug_logger(log_stream: StringIO) -> logging.Logger:
    """
    Configure DEBUG logger attached to log_stream.
    """
    teardown_logger()
    logger = get_logger()
    logger.setLevel(logging.DEBUG)
    logger.handlers.clear()

    handler = logging.StreamHandler(log_stream)
    handler.setLevel(logging.DEBUG)
    handler.setFormatter(logging.Formatter("[%(levelname)s] %(message)s"))

    logger.addHandler(handler)
    return logger


# ---------------------------------------------------------------------
# Echo output capture
# ---------------------------------------------------------------------


@pytest.fixture
def echo_output(capsys: pytest.CaptureFixture[str]) -> Callable[[], str]:
    """
    Capture and return combined echo (stdout + stderr) output.

    Usage:
        echo_output() -> returns captured output since last call.
    """

    def _get_output() -> str:
        captured = capsys.readouterr()
        return captured.out + captured.err

    return _get_output


# ---------------------------------------------------------------------
# Tiny model / data fixtures
# ---------------------------------------------------------------------


@pytest.fixture
def tiny_arch() -> ArchConfig:
    return ArchConfig(stage_channels=[8, 8, 8, 8], embed_dim=16, decoder_channels=[8, 8])


@pytest.fixture
def tiny_params(tiny_arch: ArchConfig) -> ModelParams:
    return init_params(0, tiny_arch)


@pytest.fixture
def tiny_synth() -> SynthConfig:
    return SynthConfig(n_videos=3, n_frames=3, height=TINY_SIZE, width=TINY_SIZE)


@pytest.fixture
def tiny_video(tiny_synth: SynthConfig) -> VideoSequence:
    return generate_video(7, tiny_synth, video_id="video_000")


@pytest.fixture
def tiny_train_config() -> TrainConfig:
    return TrainConfig(epochs=2, samples_per_epoch=8, batch_size=2, mae_patch_size=16)


@pytest.fixture
def tiny_ttt_config() -> TTTConfig:
    return TTTConfig(steps_per_frame=1, loops=2, learning_rate=1e-3)


@pytest.fixture
def tiny_experiment() -> dict[str, Any]:
    """A complete but tiny experiment config (JSON-compatible)."""
    return copy.deepcopy(TINY_EXPERIMENT)


@pytest.fixture
def tiny_config_file(tmp_path: Path, tiny_experiment: dict[str, Any]) -> Path:
    path = tmp_path / "experiment.json"
    path.write_text(json.dumps(tiny_experiment), encoding="utf-8")
    return path


# ---------------------------------------------------------------------
# CLI subprocess runner
# ---------------------------------------------------------------------


@pytest.fixture
def run_cli(tmp_path: Path) -> Callable[..., tuple[str, str, int]]:
    """
    Run CLI in subprocess with tmp_path isolation.
    """

    def _run(*args: str, env: dict[str, str] | None = None) -> tuple[str, str, int]:
        return invoke_cli(args, tmp_path=tmp_path, env=env)

    return _run
