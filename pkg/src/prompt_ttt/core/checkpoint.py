"""
Model checkpoints.

A checkpoint directory holds:

- checkpoint.pt: torch container with the model state dict and, when given,
  the optimizer state dict plus the components it covers.
- checkpoint.json: sidecar with format_version, arch_config, the run config,
  per-component digests and parameter shapes.

Loading rebuilds the model from the sidecar architecture and verifies every
component digest, so a round trip is bit-exact or fails loudly. A saved
optimizer comes back as an OptimizerState bound to the rebuilt model.
"""

from __future__ import annotations

import json
import pickle
from dataclasses import asdict
from pathlib import Path
from typing import Any

import torch

from prompt_ttt.constants import (
    CHECKPOINT_FILE_NAME,
    CHECKPOINT_FORMAT_VERSION,
    CHECKPOINT_SIDECAR_NAME,
    DEFAULT_ENCODING,
    VALID_COMPONENTS,
)
from prompt_ttt.core.model import ModelParams, init_params, param_digest
from prompt_ttt.core.trainer import make_optimizer
from prompt_ttt.exceptions import DatasetFormatError, ValidationError
from prompt_ttt.types import ArchConfig, OptimizerState
from prompt_ttt.utils.logger_setup import get_logger

__all__ = [
    "component_digests",
    "load_checkpoint",
    "optimizer_components",
    "restore_optimizer",
    "save_checkpoint",
]

logger = get_logger()

MSG_MISSING = "Missing checkpoint file: {path}"
MSG_CORRUPT = "Corrupt checkpoint file: {path} ({reason})"
MSG_VERSION = "Unsupported checkpoint format_version {found} in {path} (expected {expected})."
MSG_DIGEST = "Checkpoint digest mismatch for component {component!r} in {path}."
MSG_OPT_COMPONENT = "Optimizer covers a parameter outside the model components."


def component_digests(params: ModelParams) -> dict[str, str]:
    return {name: param_digest(params, name) for name in VALID_COMPONENTS}


def optimizer_components(params: ModelParams, opt: OptimizerState) -> list[str]:
    """Components whose parameters the optimizer updates, in optimizer order."""
    owner = {
        id(p): name for name in VALID_COMPONENTS for p in params.component(name).parameters()
    }
    names: list[str] = []
    for group in opt.optimizer.param_groups:
        for p in group["params"]:
            name = owner.get(id(p))
            if name is None:
                raise ValidationError(MSG_OPT_COMPONENT)
            if name not in names:
                names.append(name)
    return names


def restore_optimizer(
    params: ModelParams, state: dict[str, Any], meta: dict[str, Any]
) -> OptimizerState:
    """Rebuild Adam over `meta["components"]` of `params` and load its saved state."""
    parameters = [p for name in meta["components"] for p in params.component(name).parameters()]
    opt = make_optimizer(parameters, float(meta["learning_rate"]))
    opt.optimizer.load_state_dict(state)
    opt.set_learning_rate(float(meta["learning_rate"]))
    opt.step = int(meta["step"])
    opt.best_loss = meta["best_loss"]
    opt.stale_count = int(meta["stale_count"])
    return opt


def save_checkpoint(
    params: ModelParams,
    directory: Path | str,
    *,
    opt: OptimizerState | None = None,
    config: dict[str, Any] | None = None,
) -> Path:
    """Write checkpoint.pt and checkpoint.json into `directory`; return the directory."""
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    container: dict[str, Any] = {"model": params.state_dict()}
    if opt is not None:
        container["optimizer"] = opt.optimizer.state_dict()
        container["optimizer_meta"] = {
            "learning_rate": opt.learning_rate,
            "step": opt.step,
            "best_loss": opt.best_loss,
            "stale_count": opt.stale_count,
            "components": optimizer_components(params, opt),
        }
    torch.save(container, root / CHECKPOINT_FILE_NAME)

    sidecar = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "arch_config": asdict(params.arch),
        "config": config or {},
        "digests": component_digests(params),
        "shapes": {name: list(t.shape) for name, t in params.state_dict().items()},
    }
    (root / CHECKPOINT_SIDECAR_NAME).write_text(
        json.dumps(sidecar, indent=2, sort_keys=True) + "\n", encoding=DEFAULT_ENCODING
    )
    logger.info(f"Saved checkpoint to {root} (encoder {sidecar['digests']['encoder'][:12]})")
    return root


def load_checkpoint(directory: Path | str) -> tuple[ModelParams, dict[str, Any]]:
    """
    Rebuild the model from a checkpoint directory.

    Returns:
        The model and the sidecar metadata. sidecar["optimizer_state"] holds
        the restored OptimizerState bound to the model, or None.

    Raises:
        DatasetFormatError: Missing/corrupt files, version mismatch or digest mismatch.
    """
    root = Path(directory)
    sidecar_path = root / CHECKPOINT_SIDECAR_NAME
    weights_path = root / CHECKPOINT_FILE_NAME
    for path in (sidecar_path, weights_path):
        if not path.is_file():
            raise DatasetFormatError(MSG_MISSING.format(path=path))
    try:
        sidecar: dict[str, Any] = json.loads(sidecar_path.read_text(encoding=DEFAULT_ENCODING))
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(MSG_CORRUPT.format(path=sidecar_path, reason=exc)) from exc
    found = sidecar.get("format_version")
    if found != CHECKPOINT_FORMAT_VERSION:
        raise DatasetFormatError(
            MSG_VERSION.format(found=found, path=sidecar_path, expected=CHECKPOINT_FORMAT_VERSION)
        )

    try:
        container = torch.load(weights_path, map_location="cpu", weights_only=True)
        model = init_params(0, ArchConfig(**sidecar["arch_config"]))
        model.load_state_dict(container["model"])
    except (KeyError, TypeError, RuntimeError, OSError, EOFError, pickle.UnpicklingError) as exc:
        raise DatasetFormatError(MSG_CORRUPT.format(path=weights_path, reason=exc)) from exc

    for component, expected in sidecar.get("digests", {}).items():
        if param_digest(model, component) != expected:
            raise DatasetFormatError(MSG_DIGEST.format(component=component, path=weights_path))

    meta = container.get("optimizer_meta")
    sidecar["optimizer_meta"] = meta
    sidecar["optimizer_state"] = None
    if container.get("optimizer") is not None:
        try:
            sidecar["optimizer_state"] = restore_optimizer(model, container["optimizer"], meta)
        except (KeyError, TypeError, ValueError) as exc:
            raise DatasetFormatError(MSG_CORRUPT.format(path=weights_path, reason=exc)) from exc
    logger.info(f"Loaded checkpoint from {root} (encoder {param_digest(model, 'encoder')[:12]})")
    return model, sidecar
