"""Unit tests for CLI argument validators and config resolution."""

from __future__ import annotations

import argparse

import pytest

from prompt_ttt.cli.args import n_points_list, non_negative_int, threshold_range
from prompt_ttt.cli.handlers import resolve_config, resolve_effective_color_mode
from prompt_ttt.cli.parser import create_parser


@pytest.mark.parametrize(("value", "expected"), [("0.5", 0.5), ("1", 1.0), ("1e-3", 0.001)])
def test_threshold_range_valid(value: str, expected: float) -> None:
    assert threshold_range(value) == expected


@pytest.mark.parametrize("value", ["0", "1.5", "-0.1", "abc"])
def test_threshold_range_invalid(value: str) -> None:
    with pytest.raises(argparse.ArgumentTypeError):
        threshold_range(value)


def test_non_negative_int() -> None:
    assert non_negative_int("0") == 0
    with pytest.raises(argparse.ArgumentTypeError, match="non-negative"):
        non_negative_int("-1")
    with pytest.raises(argparse.ArgumentTypeError, match="Expected an integer"):
        non_negative_int("two")


def test_n_points_list() -> None:
    assert n_points_list("1,3,5") == [1, 3, 5]
    assert n_points_list(" 2 , 4 ") == [2, 4]
    for bad in ("", "1,x", "0,1"):
        with pytest.raises(argparse.ArgumentTypeError):
            n_points_list(bad)


def test_resolve_config_applies_flags_over_file(tiny_config_file: object) -> None:
    args = create_parser().parse_args(
        [
            "eval",
            "--config",
            str(tiny_config_file),
            "--out",
            "runs/x",
            "--mode",
            "rot_ttt",
            "--threshold",
            "0.4",
            "--domain",
            "source",
            "--seed",
            "9",
        ]
    )
    config = resolve_config(args)
    assert config.output.out_dir == "runs/x"
    assert config.eval.mode == "rot_ttt"
    assert config.eval.threshold == 0.4
    assert config.eval.domain == "source"
    assert config.seed == config.ttt.seed == 9
    assert config.model.embed_dim == 16


def test_resolve_config_epochs_and_points(tiny_config_file: object) -> None:
    train = create_parser().parse_args(["train", "--config", str(tiny_config_file), "--epochs", "0"])
    assert resolve_config(train).trainer.epochs == 0
    ablate = create_parser().parse_args(["ablate-prompts", "--n-points", "3,5"])
    assert resolve_config(ablate).ablation.n_points_list == [3, 5]


def test_color_mode_resolution(monkeypatch: pytest.MonkeyPatch) -> None:
    assert resolve_effective_color_mode("never") == "never"
    monkeypatch.setenv("PROMPT_TTT_COLOR_MODE", "always")
    assert resolve_effective_color_mode(None) == "always"
    monkeypatch.setenv("PROMPT_TTT_COLOR_MODE", "rainbow")
    assert resolve_effective_color_mode(None) == "auto"
