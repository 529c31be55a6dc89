"""
Unit tests for prompt_ttt.settings.

Covers:
- Environment detection and helpers
- Test mode logic
- .env loading and diagnostics
- Logging defaults and safe int parsing
- PROMPT_TTT_CFG__ experiment overrides
"""

from __future__ import annotations

from collections.abc import Callable
from pathlib import Path
from types import ModuleType

import pytest

import prompt_ttt.settings as settings

# ---------------------------------------------------------------------
# Environment detection
# ---------------------------------------------------------------------


@pytest.mark.parametrize(
    ("env_value", "expected"),
    [
        ("dev", "DEV"),
        ("UAT", "UAT"),
        ("PROD", "PROD"),
        ("unexpected", "UNEXPECTED"),
        ("", "DEV"),
        (None, "DEV"),
    ],
)
def test_get_environment(
    monkeypatch: pytest.MonkeyPatch, env_value: str | None, expected: str
) -> None:
    if env_value is None:
        monkeypatch.delenv("PROMPT_TTT_ENV", raising=False)
    else:
        monkeypatch.setenv("PROMPT_TTT_ENV", env_value)
    assert settings.get_environment() == expected


def test_env_helpers(patch_env: Callable[[str], None]) -> None:
    patch_env("DEV")
    assert settings.is_dev()
    assert not settings.is_uat()
    assert not settings.is_prod()

    patch_env("UAT")
    assert settings.is_uat()

    patch_env("PROD")
    assert settings.is_prod()


# ---------------------------------------------------------------------
# Test mode detection
# ---------------------------------------------------------------------


def test_is_test(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setenv("PROMPT_TTT_ENV", "TEST")
    assert settings.is_test()

    monkeypatch.setenv("PROMPT_TTT_ENV", "DEV")
    monkeypatch.setenv("PYTEST_CURRENT_TEST", "yes")
    assert settings.is_test()
    assert not settings.is_test_mode()


# ---------------------------------------------------------------------
# .env loading and diagnostics
# ---------------------------------------------------------------------


def test_load_settings(
    load_fresh_settings: Callable[[Path | None], ModuleType],
    tmp_path: Path,
    monkeypatch: pytest.MonkeyPatch,
) -> None:
    # Registered with monkeypatch so the values loaded from .env are undone afterwards.
    monkeypatch.setenv("PROMPT_TTT_ENV", "DEV")
    monkeypatch.setenv("PROMPT_TTT_LOG_MAX_BYTES", "1")
    dotenv = tmp_path / ".env"
    dotenv.write_text("PROMPT_TTT_ENV=UAT\nPROMPT_TTT_LOG_MAX_BYTES=12345\n")

    sett = load_fresh_settings(dotenv)
    assert dotenv.resolve() in sett.resolve_loaded_dotenv_paths()
    assert sett.get_environment() == "UAT"
    assert sett.get_log_max_bytes() == 12345


def test_load_settings_none(load_fresh_settings: Callable[[Path | None], ModuleType]) -> None:
    sett = load_fresh_settings(None)
    assert sett.load_settings() == []


def test_missing_dotenv_path_is_not_loaded(
    load_fresh_settings: Callable[[Path | None], ModuleType], tmp_path: Path
) -> None:
    sett = load_fresh_settings(tmp_path / "absent.env")
    assert sett.load_settings() == []


# ---------------------------------------------------------------------
# Safe int and log defaults
# ---------------------------------------------------------------------


@pytest.mark.parametrize(
    ("envval", "default", "expected"),
    [("123", 5, 123), ("bad", 5, 5), (None, 7, 7)],
)
def test_safe_int(
    monkeypatch: pytest.MonkeyPatch, envval: str | None, default: int, expected: int
) -> None:
    key = "PROMPT_TTT_LOG_MAX_BYTES"
    if envval is None:
        monkeypatch.delenv(key, raising=False)
    else:
        monkeypatch.setenv(key, envval)
    assert settings.safe_int(key, default) == expected


def test_get_log_defaults() -> None:
    assert settings.get_log_max_bytes() == 1_000_000
    assert settings.get_log_backup_count() == 5


def test_get_log_dir_per_environment(patch_env: Callable[[str], None]) -> None:
    patch_env("uat")
    assert settings.get_log_dir() == Path("logs") / "UAT"


# ---------------------------------------------------------------------
# Experiment config overrides
# ---------------------------------------------------------------------


def test_get_config_overrides_parses_sections(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setenv("PROMPT_TTT_CFG__trainer__epochs", "5")
    monkeypatch.setenv("PROMPT_TTT_CFG__ttt__rotations", "[0, 180]")
    monkeypatch.setenv("PROMPT_TTT_CFG__eval__mode", "prompt_ttt")
    monkeypatch.setenv("PROMPT_TTT_CFG__seed", "3")

    overrides = settings.get_config_overrides()
    assert overrides == {
        "": {"seed": 3},
        "eval": {"mode": "prompt_ttt"},
        "trainer": {"epochs": 5},
        "ttt": {"rotations": [0, 180]},
    }


def test_get_config_overrides_empty() -> None:
    assert settings.get_config_overrides() == {}
