"""
Self-supervised pretext tasks shared by source training and the TTT baselines.

- Rotation prediction: each image is turned clockwise by a random number of
  quarter turns and `rot_head` classifies the turn from pooled encoder features.
- Masked reconstruction: a random subset of non-overlapping square patches is
  zeroed and `recon_head` reconstructs the original pixels there.
"""

from __future__ import annotations

import numpy as np
import torch

from prompt_ttt.core.losses import masked_reconstruction_loss, rotation_prediction_loss
from prompt_ttt.core.model import ModelParams
from prompt_ttt.exceptions import ConfigurationError
from prompt_ttt.types import LossValue

__all__ = ["reconstruction_loss", "rotation_loss", "sample_patch_mask"]

MSG_PATCH_SIZE = "Patch size {patch} does not divide image size {height}x{width}."


def sample_patch_mask(
    batch: int, height: int, width: int, patch: int, ratio: float, rng: np.random.Generator
) -> torch.Tensor:
    """(batch, 1, H, W) boolean mask covering round(ratio * n_patches) patches per image."""
    if patch <= 0 or height % patch or width % patch:
        raise ConfigurationError(MSG_PATCH_SIZE.format(patch=patch, height=height, width=width))
    rows, cols = height // patch, width // patch
    n_masked = round(ratio * rows * cols)
    grid = np.zeros((batch, rows * cols), dtype=bool)
    for b in range(batch):
        grid[b, rng.permutation(rows * cols)[:n_masked]] = True
    cells = grid.reshape(batch, 1, rows, cols)
    pixels = cells.repeat(patch, axis=2).repeat(patch, axis=3)
    return torch.from_numpy(pixels)


def rotation_loss(model: ModelParams, images: torch.Tensor, rng: np.random.Generator) -> LossValue:
    """Cross-entropy of `rot_head` on randomly rotated (B, 1, H, W) images."""
    turns = rng.integers(0, 4, size=images.shape[0])
    logits = torch.cat(
        [
            model.rotation_logits(torch.rot90(images[i : i + 1], k=-int(t), dims=(-2, -1)))
            for i, t in enumerate(turns)
        ]
    )
    targets = torch.as_tensor(turns, dtype=torch.long)
    return rotation_prediction_loss(logits, targets)


def reconstruction_loss(
    model: ModelParams,
    images: torch.Tensor,
    rng: np.random.Generator,
    mask_ratio: float,
    patch_size: int,
) -> LossValue:
    """Masked-patch reconstruction error of `recon_head` on (B, 1, H, W) images."""
    batch, _, height, width = images.shape
    mask = sample_patch_mask(batch, height, width, patch_size, mask_ratio, rng)
    recon = model.reconstruct(images.masked_fill(mask, 0.0))
    return masked_reconstruction_loss(recon, images, mask)
