"""Command handlers for the prompt_ttt CLI.

Each `cmd_*` handler runs one subcommand against a resolved ExperimentConfig
and returns EXIT_SUCCESS; failures are raised as PromptTTTError subclasses and
mapped to exit codes by `utils_runner.handle_cli_workflow()`.

Run directory layout (all paths relative to `--out`):

    data/source/            full synthetic dataset with the train/test split
    data/target/            shifted copies of the test videos
    checkpoint/             checkpoint.pt + checkpoint.json
    train_history.csv
    eval/<mode>/            metrics_records.csv, per_anatomy.csv/.md,
                            summary.csv/.md, ttt_trace.csv
    ablation/               ablation.csv/.md

Every output directory also receives resolved_config.json.

Functions:
    resolve_effective_color_mode(): Resolve color mode from CLI arg, env var, or default.
    get_version(): Retrieve installed package version.
    resolve_config(): Load the config and apply CLI flags on top.
    evaluate_videos(): Per-video adaptation from the pristine model, then metrics.
    cmd_synth(), cmd_train(), cmd_eval(), cmd_ablate_prompts(), cmd_report(): Subcommands.
    dispatch(): Run the subcommand named in the parsed arguments.
"""

# ---------------------------------------------------------------------
# Imports
# ---------------------------------------------------------------------

from __future__ import annotations

import dataclasses
import os
import sys
from argparse import Namespace
from collections.abc import Sequence
from functools import lru_cache
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np
import numpy.typing as npt
import pandas as pd
import torch

from prompt_ttt.cli.args import (
    ABLATION_SUBDIR,
    CHECKPOINT_SUBDIR,
    CMD_ABLATE,
    CMD_EVAL,
    CMD_REPORT,
    CMD_SYNTH,
    CMD_TRAIN,
    DATA_SUBDIR,
    EVAL_SUBDIR,
    REPORT_FILE_NAME,
)
from prompt_ttt.config import (
    ExperimentConfig,
    config_from_dict,
    config_to_dict,
    load_config,
    with_seed,
    write_resolved_config,
)
from prompt_ttt.constants import (
    ANATOMY_CODES,
    DEFAULT_ENCODING,
    ENV_COLOR_MODE,
    EXIT_SUCCESS,
    METRIC_COLUMNS,
    REFERENCE_TABLE_I,
    REFERENCE_TABLE_II_TTT,
    REFERENCE_TABLE_III,
    SOURCE_SUBDIR,
    TARGET_SUBDIR,
    VALID_COLOR_MODES,
    VALID_EVAL_MODES,
    BaselineStrategy,
)
from prompt_ttt.core.checkpoint import load_checkpoint, save_checkpoint
from prompt_ttt.core.metrics import EvaluationResult, binarize, evaluate_dataset
from prompt_ttt.core.model import ModelParams, param_digest
from prompt_ttt.core.synthdata import (
    apply_domain_shift,
    generate_dataset,
    load_dataset,
    save_dataset,
    split_dataset,
)
from prompt_ttt.core.trainer import box_from_mask, fit
from prompt_ttt.core.ttt_engine import baseline_ttt_video, infer_after_ttt, ttt_video
from prompt_ttt.exceptions import AdaptationError, ConfigurationError
from prompt_ttt.types import DatasetManifest, TTTConfig, TTTTrace, VideoSequence
from prompt_ttt.utils.formatter import format_markdown_table, format_metric, format_table_lines
from prompt_ttt.utils.logger_setup import get_logger
from prompt_ttt.utils.seeding import derive_seed, seed_everything

__all__ = [
    "cmd_ablate_prompts",
    "cmd_eval",
    "cmd_report",
    "cmd_synth",
    "cmd_train",
    "dispatch",
    "evaluate_videos",
    "get_version",
    "print_result_lines",
    "resolve_config",
    "resolve_effective_color_mode",
]

logger = get_logger()

# ---------------------------------------------------------------------
# Message Constants
# ---------------------------------------------------------------------

MSG_NOT_WRITABLE = "Output directory {path} is not writable: {reason}"
MSG_NO_TEST_VIDEOS = "Dataset {path} has no test videos."
MSG_LEAKAGE = "Encoder of the pristine checkpoint changed before video {video_id}."
MSG_NO_RUN_DIRS = "report needs at least one run directory."
MSG_MISSING_RUN_DIR = "Run directory not found: {path}"
MSG_NO_TABLES = "No summary.csv, per_anatomy.csv or ablation.csv found under {paths}."
MSG_COLUMN_MISMATCH = "Column mismatch in {table}: {path} has {found}, expected {expected}."
MSG_UNKNOWN_COMMAND = "Unknown command {command!r}."

DEFAULT_COLOR_MODE = "auto"

RECORDS_CSV = "metrics_records.csv"
PER_ANATOMY_CSV = "per_anatomy.csv"
SUMMARY_CSV = "summary.csv"
TRACE_CSV = "ttt_trace.csv"
ABLATION_CSV = "ablation.csv"
HISTORY_CSV = "train_history.csv"
REPORT_TABLES = (SUMMARY_CSV, PER_ANATOMY_CSV, ABLATION_CSV)
COMPARISON_TABLE = f"{EVAL_SUBDIR}/{SUMMARY_CSV}"

BASELINE_STRATEGIES: dict[str, BaselineStrategy] = {"rot_ttt": "rotation", "mae_ttt": "mae"}

# ---------------------------------------------------------------------
# Argument Resolution Helpers
# ---------------------------------------------------------------------


def resolve_effective_color_mode(cli_color_mode: str | None) -> str:
    """Resolve color mode from CLI arg, env var, or default.

    Priority:
        1. CLI argument (--color)
        2. Environment variable PROMPT_TTT_COLOR_MODE
        3. "auto"
    """
    if cli_color_mode is not None:
        return cli_color_mode

    env_value = os.getenv(ENV_COLOR_MODE)
    if env_value in VALID_COLOR_MODES:
        return env_value

    return DEFAULT_COLOR_MODE


def resolve_config(args: Namespace) -> ExperimentConfig:
    """
    Defaults <- --config file <- PROMPT_TTT_CFG__* env <- explicit CLI flags.

    Raises:
        ConfigurationError: Unknown keys, wrong types or invalid values.
    """
    config = load_config(getattr(args, "config", None))
    data = config_to_dict(config)
    if getattr(args, "out", None) is not None:
        data["output"]["out_dir"] = str(args.out)
    if getattr(args, "epochs", None) is not None:
        data["trainer"]["epochs"] = args.epochs
    if getattr(args, "mode", None) is not None:
        data["eval"]["mode"] = args.mode
    if getattr(args, "oracle", None):
        data["eval"]["oracle"] = True
    if getattr(args, "domain", None) is not None:
        data["eval"]["domain"] = args.domain
    if getattr(args, "threshold", None) is not None:
        data["eval"]["threshold"] = args.threshold
    if getattr(args, "n_points", None) is not None:
        data["ablation"]["n_points_list"] = list(args.n_points)
    config = config_from_dict(data)
    if getattr(args, "seed", None) is not None:
        config = with_seed(config, args.seed)
    return config


# ---------------------------------------------------------------------
# Metadata Helpers
# ---------------------------------------------------------------------


@lru_cache(maxsize=1)
def get_version() -> str:
    """
    Retrieve the installed package version from importlib.metadata.

    Returns:
        str: The version string, or 'unknown' if not installed.
    """
    try:
        return version("prompt-ttt")
    except PackageNotFoundError:
        return "unknown (not installed)"


# ---------------------------------------------------------------------
# Output Helpers
# ---------------------------------------------------------------------


def print_result_lines(lines: list[str]) -> None:
    for line in lines:
        sys.stdout.write(line + "\n")


def _prepare_dir(path: Path) -> Path:
    try:
        path.mkdir(parents=True, exist_ok=True)
        probe = path / ".write_probe"
        probe.write_text("", encoding=DEFAULT_ENCODING)
        probe.unlink()
    except OSError as exc:
        raise ConfigurationError(MSG_NOT_WRITABLE.format(path=path, reason=exc)) from exc
    return path


def _write_csv(frame: pd.DataFrame, path: Path) -> None:
    frame.to_csv(path, index=False, float_format="%.6f", encoding=DEFAULT_ENCODING)


def _write_text(text: str, path: Path) -> None:
    path.write_text(text, encoding=DEFAULT_ENCODING)


def _run_dir(config: ExperimentConfig) -> Path:
    return Path(config.output.out_dir)


def _reference(table: str, key: object) -> str:
    """Published reference numbers for a table row, or '' when there is none."""
    if table == SUMMARY_CSV and key in REFERENCE_TABLE_I:
        return " / ".join(f"{v:g}" for v in REFERENCE_TABLE_I[str(key)])
    if table == PER_ANATOMY_CSV and key in REFERENCE_TABLE_II_TTT:
        return f"{REFERENCE_TABLE_II_TTT[str(key)]:g}"
    if table == ABLATION_CSV:
        try:
            row = REFERENCE_TABLE_III.get(int(str(key)))
        except ValueError:
            row = None
        if row is not None:
            return " / ".join(f"{v:g}" for v in row)
    return ""


def _metric_headers() -> list[str]:
    return ["DSC", "HD95", "ASD", "Sensitivity"]


# ---------------------------------------------------------------------
# synth
# ---------------------------------------------------------------------


def cmd_synth(config: ExperimentConfig, out_dir: Path | None = None) -> int:
    """
    Generate the source dataset with its 8:2 split and a shifted target set.

    The target set holds the test-split videos after `apply_domain_shift`,
    each with its own noise seed.
    """
    root = _prepare_dir((out_dir or _run_dir(config)) / DATA_SUBDIR)
    videos = generate_dataset(config.synth)
    manifest = split_dataset(videos, config.synth.seed)
    save_dataset(videos, manifest, root / SOURCE_SUBDIR)

    test_ids = manifest.ids("test")
    shifted = [
        apply_domain_shift(
            video,
            dataclasses.replace(
                config.synth.shift, seed=derive_seed(config.synth.shift.seed, config.synth.seed, i)
            ),
        )
        for i, video in enumerate(videos)
        if video.video_id in test_ids
    ]
    target_manifest = DatasetManifest(
        videos=[entry for entry in manifest.videos if entry.split == "test"],
        split_seed=manifest.split_seed,
        format_version=manifest.format_version,
    )
    save_dataset(shifted, target_manifest, root / TARGET_SUBDIR)
    write_resolved_config(config, root)
    logger.info(
        f"Synthesized {len(videos)} video(s): {len(manifest.ids('train'))} train, "
        f"{len(test_ids)} test (shifted copies in {root / TARGET_SUBDIR})"
    )
    return EXIT_SUCCESS


# ---------------------------------------------------------------------
# train
# ---------------------------------------------------------------------


def _split_videos(
    videos: Sequence[VideoSequence], manifest: DatasetManifest, split: str
) -> list[VideoSequence]:
    wanted = set(manifest.ids(split))
    return [video for video in videos if video.video_id in wanted]


def cmd_train(
    config: ExperimentConfig,
    data_dir: Path | None = None,
    out_checkpoint: Path | None = None,
) -> int:
    """Train on the source train split; write the checkpoint and train_history.csv."""
    run_dir = _run_dir(config)
    data_root = data_dir or run_dir / DATA_SUBDIR
    videos, manifest = load_dataset(data_root / SOURCE_SUBDIR)
    train_videos = _split_videos(videos, manifest, "train")
    checkpoint_dir = _prepare_dir(out_checkpoint or run_dir / CHECKPOINT_SUBDIR)

    params, history = fit(train_videos, config.trainer, config.model)
    save_checkpoint(params, checkpoint_dir, opt=history.opt_state, config=config_to_dict(config))
    write_resolved_config(config, checkpoint_dir)

    frame = pd.DataFrame(
        {
            "epoch": range(1, history.epochs + 1),
            "train_loss": history.train_loss,
            "main_loss": history.main_loss,
            "aux_loss": history.aux_loss,
            "learning_rate": history.learning_rates,
        }
    )
    _write_csv(frame, _prepare_dir(run_dir) / HISTORY_CSV)
    if history.epochs:
        logger.info(
            f"Trained {history.epochs} epoch(s): L_train {history.train_loss[0]:.5f} -> "
            f"{history.train_loss[-1]:.5f}"
        )
    else:
        logger.info("Zero epochs requested; checkpoint holds the initialization.")
    return EXIT_SUCCESS


# ---------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------


def _eval_videos(config: ExperimentConfig, data_root: Path) -> list[VideoSequence]:
    subdir = TARGET_SUBDIR if config.eval.domain == "target" else SOURCE_SUBDIR
    videos, manifest = load_dataset(data_root / subdir)
    test_videos = _split_videos(videos, manifest, "test")
    if not test_videos:
        raise ConfigurationError(MSG_NO_TEST_VIDEOS.format(path=data_root / subdir))
    return test_videos


def _adapt(
    video: VideoSequence, params: ModelParams, mode: str, config: TTTConfig, prompt_code: int
) -> tuple[ModelParams, TTTTrace | None]:
    if mode == "prompt_ttt":
        return ttt_video(video, video.masks[:, prompt_code - 1], params, config)
    if mode in BASELINE_STRATEGIES:
        return baseline_ttt_video(video, params, config, BASELINE_STRATEGIES[mode])
    return params, None


def evaluate_videos(
    params: ModelParams,
    videos: Sequence[VideoSequence],
    config: ExperimentConfig,
    *,
    mode: str,
    ttt_config: TTTConfig | None = None,
) -> tuple[EvaluationResult, pd.DataFrame]:
    """
    Adapt a copy of the pristine model per video, then score every present anatomy.

    Box prompts are the exact ground-truth boxes. Returns the evaluation and
    the TTT trace rows (video, loop, frame, step, loss, learning_rate).

    Raises:
        AdaptationError: If the pristine encoder changed between videos.
    """
    ttt_config = ttt_config or config.ttt
    prompt_code = ANATOMY_CODES[config.eval.prompt_anatomy]
    pristine = param_digest(params, "encoder")
    predictions: dict[tuple[str, int, int], npt.NDArray[np.uint8]] = {}
    trace_rows: list[dict[str, object]] = []

    for video in videos:
        current = param_digest(params, "encoder")
        if current != pristine:
            raise AdaptationError(MSG_LEAKAGE.format(video_id=video.video_id))
        logger.info(f"{video.video_id}: {mode} from pristine encoder {current[:12]}")

        adapted, trace = _adapt(video, params, mode, ttt_config, prompt_code)
        if trace is not None:
            trace_rows.extend(
                {
                    "video": video.video_id,
                    **row._asdict(),
                    "learning_rate": lr,
                }
                for row, lr in zip(trace.rows, trace.learning_rates, strict=True)
            )

        for t in range(video.n_frames):
            frame = torch.from_numpy(video.frames[t].copy())
            for code in (int(c) + 1 for c in video.present[t].nonzero()[0]):
                gt = video.anatomy_mask(t, code)
                if config.eval.oracle:
                    predictions[(video.video_id, t, code)] = gt.copy()
                    continue
                prob = infer_after_ttt(frame, box_from_mask(gt), adapted)
                predictions[(video.video_id, t, code)] = binarize(prob, config.eval.threshold)

    result = evaluate_dataset(predictions, videos, config.eval.threshold)
    trace_frame = pd.DataFrame(
        trace_rows, columns=["video", "loop", "frame", "step", "loss", "learning_rate"]
    )
    return result, trace_frame


def _summary_row(
    label_name: str, label: object, result: EvaluationResult, seed: int
) -> dict[str, object]:
    return {
        label_name: label,
        **{column: result.overall[column] for column in METRIC_COLUMNS},
        "n_undefined": result.n_undefined,
        "seed": seed,
    }


def _table_markdown(table: str, frame: pd.DataFrame, title: str) -> str:
    key = frame.columns[0]
    headers = [key, *_metric_headers(), "reference"]
    rows = [
        [row[key], *(row[c] for c in METRIC_COLUMNS), _reference(table, row[key])]
        for row in frame.to_dict("records")
    ]
    return f"## {title}\n\n" + format_markdown_table(headers, rows)


def _print_table(frame: pd.DataFrame) -> None:
    key = frame.columns[0]
    rows = [[row[key], *(row[c] for c in METRIC_COLUMNS)] for row in frame.to_dict("records")]
    print_result_lines(format_table_lines([key, *_metric_headers()], rows))


def cmd_eval(
    config: ExperimentConfig,
    checkpoint_dir: Path | None = None,
    data_dir: Path | None = None,
) -> int:
    """Evaluate one mode (none | prompt_ttt | rot_ttt | mae_ttt) on the test videos."""
    run_dir = _run_dir(config)
    params, _ = load_checkpoint(checkpoint_dir or run_dir / CHECKPOINT_SUBDIR)
    videos = _eval_videos(config, data_dir or run_dir / DATA_SUBDIR)
    mode = config.eval.mode
    out = _prepare_dir(run_dir / EVAL_SUBDIR / mode)

    result, trace = evaluate_videos(params, videos, config, mode=mode)

    records = result.records_frame()
    records["seed"] = config.seed
    _write_csv(records, out / RECORDS_CSV)

    per_anatomy = result.per_anatomy.reset_index()
    per_anatomy["seed"] = config.seed
    _write_csv(per_anatomy, out / PER_ANATOMY_CSV)
    _write_text(
        _table_markdown(PER_ANATOMY_CSV, per_anatomy, f"Per-anatomy ({mode})"),
        out / "per_anatomy.md",
    )

    summary = pd.DataFrame([_summary_row("mode", mode, result, config.seed)])
    _write_csv(summary, out / SUMMARY_CSV)
    _write_text(_table_markdown(SUMMARY_CSV, summary, "Summary"), out / "summary.md")

    _write_csv(trace, out / TRACE_CSV)
    write_resolved_config(config, out)

    _print_table(per_anatomy)
    logger.info(
        f"eval {mode}: DSC {format_metric(result.overall['dsc'])} "
        f"HD95 {format_metric(result.overall['hd95'])} "
        f"({result.n_undefined} undefined record(s))"
    )
    return EXIT_SUCCESS


# ---------------------------------------------------------------------
# ablate-prompts
# ---------------------------------------------------------------------


def cmd_ablate_prompts(
    config: ExperimentConfig,
    checkpoint_dir: Path | None = None,
    data_dir: Path | None = None,
    n_points_list: Sequence[int] | None = None,
) -> int:
    """Prompt-TTT evaluation once per point count; only n_points differs between rows."""
    run_dir = _run_dir(config)
    params, _ = load_checkpoint(checkpoint_dir or run_dir / CHECKPOINT_SUBDIR)
    videos = _eval_videos(config, data_dir or run_dir / DATA_SUBDIR)
    out = _prepare_dir(run_dir / ABLATION_SUBDIR)

    rows = []
    for n in n_points_list or config.ablation.n_points_list:
        ttt_config = dataclasses.replace(config.ttt, n_points=n)
        result, _ = evaluate_videos(
            params, videos, config, mode="prompt_ttt", ttt_config=ttt_config
        )
        rows.append(_summary_row("n_points", n, result, config.seed))
        logger.info(f"ablation n_points={n}: DSC {format_metric(result.overall['dsc'])}")

    table = pd.DataFrame(rows)
    _write_csv(table, out / ABLATION_CSV)
    _write_text(
        _table_markdown(ABLATION_CSV, table, "Point-prompt ablation"), out / "ablation.md"
    )
    write_resolved_config(config, out)
    _print_table(table)
    return EXIT_SUCCESS


# ---------------------------------------------------------------------
# report
# ---------------------------------------------------------------------


def _is_mode_summary(relative: Path) -> bool:
    return relative.name == SUMMARY_CSV and relative.parent.parent.as_posix() == EVAL_SUBDIR


def _mode_rank(path: Path) -> tuple[int, str]:
    mode = path.parent.name
    if mode in VALID_EVAL_MODES:
        return VALID_EVAL_MODES.index(mode), mode
    return len(VALID_EVAL_MODES), mode


def _collect_tables(run_dirs: Sequence[Path]) -> dict[str, list[tuple[Path, pd.DataFrame]]]:
    """
    Read report tables per run, keyed by their path relative to the run.

    The per-mode `eval/<mode>/summary.csv` files of one run are stacked into
    a single mode-indexed comparison table under `eval/summary.csv`.
    """
    tables: dict[str, list[tuple[Path, pd.DataFrame]]] = {}
    for run_dir in run_dirs:
        if not run_dir.is_dir():
            raise ConfigurationError(MSG_MISSING_RUN_DIR.format(path=run_dir))
        summaries: list[tuple[Path, pd.DataFrame]] = []
        for path in sorted(run_dir.rglob("*.csv")):
            if path.name not in REPORT_TABLES:
                continue
            relative = path.relative_to(run_dir)
            if _is_mode_summary(relative):
                summaries.append((path, pd.read_csv(path)))
                continue
            tables.setdefault(relative.as_posix(), []).append((path, pd.read_csv(path)))
        if summaries:
            summaries.sort(key=lambda item: _mode_rank(item[0]))
            _check_columns(COMPARISON_TABLE, summaries)
            stacked = pd.concat([frame for _, frame in summaries], ignore_index=True)
            tables.setdefault(COMPARISON_TABLE, []).append((run_dir / EVAL_SUBDIR, stacked))
    return tables


def _check_columns(name: str, frames: list[tuple[Path, pd.DataFrame]]) -> None:
    expected = list(frames[0][1].columns)
    for path, frame in frames[1:]:
        found = list(frame.columns)
        if found != expected:
            extra = sorted(set(found) - set(expected))
            missing = sorted(set(expected) - set(found))
            raise ConfigurationError(
                MSG_COLUMN_MISMATCH.format(
                    table=name,
                    path=path,
                    found=f"{found} (extra {extra}, missing {missing})",
                    expected=expected,
                )
            )


def merge_runs(frames: Sequence[pd.DataFrame]) -> pd.DataFrame:
    """
    Seed-mean and sample standard deviation per row key (the first column).

    Returns one row per key in first-seen order with `<metric>_mean`,
    `<metric>_std` and `n_runs` columns.
    """
    combined = pd.concat(frames, ignore_index=True)
    key = combined.columns[0]
    metrics = [c for c in METRIC_COLUMNS if c in combined.columns]
    grouped = combined.groupby(key, sort=False)[metrics]
    means = grouped.mean().add_suffix("_mean")
    stds = grouped.std(ddof=1).add_suffix("_std")
    merged = pd.concat([means, stds], axis=1)
    merged["n_runs"] = combined.groupby(key, sort=False).size()
    return merged.reset_index()


def _mean_std_cell(mean: float, std: float, n_runs: int) -> str:
    if n_runs < 2:
        return format_metric(float(mean))
    return f"{format_metric(float(mean))} ± {format_metric(float(std))}"


def _report_section(name: str, merged: pd.DataFrame) -> str:
    key = merged.columns[0]
    table = Path(name).name
    headers = [key, *_metric_headers(), "runs", "reference"]
    rows = [
        [
            row[key],
            *(
                _mean_std_cell(row[f"{c}_mean"], row[f"{c}_std"], int(row["n_runs"]))
                for c in METRIC_COLUMNS
            ),
            int(row["n_runs"]),
            _reference(table, row[key]),
        ]
        for row in merged.to_dict("records")
    ]
    return f"## {name}\n\n" + format_markdown_table(headers, rows)


def cmd_report(
    run_dirs: Sequence[Path | str], config: ExperimentConfig, out_dir: Path | None = None
) -> int:
    """
    Merge summary, per-anatomy and ablation CSVs of several runs into report.md.

    Eval summaries become one mode-indexed comparison table; every other
    table keeps its own section.

    Raises:
        ConfigurationError: Empty run list, missing directory, no tables, or
            mismatched columns for the same table across runs.
    """
    if not run_dirs:
        raise ConfigurationError(MSG_NO_RUN_DIRS)
    paths = [Path(p) for p in run_dirs]
    tables = _collect_tables(paths)
    if not tables:
        raise ConfigurationError(MSG_NO_TABLES.format(paths=[str(p) for p in paths]))

    sections = []
    for name, frames in sorted(tables.items()):
        _check_columns(name, frames)
        if len(frames) < len(paths):
            logger.warning(f"{name} found in {len(frames)} of {len(paths)} run(s)")
        sections.append(_report_section(name, merge_runs([frame for _, frame in frames])))

    out = _prepare_dir(out_dir or _run_dir(config))
    text = "# prompt_ttt report\n\n" + "\n".join(sections)
    _write_text(text, out / REPORT_FILE_NAME)
    write_resolved_config(config, out)
    print_result_lines(text.rstrip("\n").split("\n"))
    return EXIT_SUCCESS


# ---------------------------------------------------------------------
# Main CLI Execution
# ---------------------------------------------------------------------


def _optional_path(value: str | None) -> Path | None:
    return Path(value) if value else None


def dispatch(args: Namespace, config: ExperimentConfig) -> int:
    """Run the parsed subcommand and return its exit code."""
    seed_everything(config.seed)
    command = args.command
    if command == CMD_SYNTH:
        return cmd_synth(config)
    if command == CMD_TRAIN:
        return cmd_train(config, _optional_path(args.data))
    if command == CMD_EVAL:
        return cmd_eval(config, _optional_path(args.checkpoint), _optional_path(args.data))
    if command == CMD_ABLATE:
        return cmd_ablate_prompts(
            config, _optional_path(args.checkpoint), _optional_path(args.data)
        )
    if command == CMD_REPORT:
        return cmd_report(args.run_dirs, config)
    raise ConfigurationError(MSG_UNKNOWN_COMMAND.format(command=command))
