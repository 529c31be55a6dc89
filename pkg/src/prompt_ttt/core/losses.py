"""
Segmentation and test-time losses.

All losses reduce by the mean over pixels (and over the batch for batched
inputs), so values are comparable across resolutions.

- dice_loss: soft Dice with smoothing DICE_EPS
- bce_loss: binary cross-entropy with probabilities clamped to [BCE_CLAMP, 1 - BCE_CLAMP]
- main_task_loss: Dice + BCE on box-prompted predictions
- aux_task_loss: BCE on point-prompted predictions
- train_loss: main + lambda * aux
- consistency_loss: mean squared difference between two predictions
- rotation_prediction_loss: 4-way cross-entropy of the rotation head
- masked_reconstruction_loss: squared error over masked pixels only
"""

# ---------------------------------------------------------------------
# Imports
# ---------------------------------------------------------------------

from __future__ import annotations

import numpy as np
import torch
import torch.nn.functional as F  # noqa: N812

from prompt_ttt.constants import BCE_CLAMP, DEFAULT_LAMBDA, DICE_EPS
from prompt_ttt.exceptions import ShapeError
from prompt_ttt.types import GroundTruthMask, LossValue, MaskProb

__all__ = [
    "aux_task_loss",
    "bce_loss",
    "consistency_loss",
    "dice_loss",
    "main_task_loss",
    "masked_reconstruction_loss",
    "rotation_prediction_loss",
    "train_loss",
]

MSG_SHAPE_MISMATCH = "Shape mismatch: {left} vs {right}."

# ---------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------


def _as_target(gt: GroundTruthMask | torch.Tensor, like: torch.Tensor) -> torch.Tensor:
    target = gt if isinstance(gt, torch.Tensor) else torch.from_numpy(np.asarray(gt))
    if tuple(target.shape) != tuple(like.shape):
        raise ShapeError(
            MSG_SHAPE_MISMATCH.format(left=tuple(like.shape), right=tuple(target.shape))
        )
    return target.to(device=like.device, dtype=like.dtype)


def _scalar(value: torch.Tensor) -> float:
    return float(value.detach().item())


# ---------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------


def dice_loss(pred: MaskProb, gt: GroundTruthMask | torch.Tensor) -> LossValue:
    """
    Soft Dice loss 1 - (2 sum(p g) + eps) / (sum(p) + sum(g) + eps).

    Sums run over the last two (spatial) axes; leading axes are averaged.
    """
    target = _as_target(gt, pred)
    intersection = (pred * target).sum(dim=(-2, -1))
    total = pred.sum(dim=(-2, -1)) + target.sum(dim=(-2, -1))
    value = (1.0 - (2.0 * intersection + DICE_EPS) / (total + DICE_EPS)).mean()
    return LossValue(value=value, components={"dice": _scalar(value)})


def bce_loss(pred: MaskProb, gt: GroundTruthMask | torch.Tensor) -> LossValue:
    target = _as_target(gt, pred)
    p = pred.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP)
    value = -(target * torch.log(p) + (1.0 - target) * torch.log(1.0 - p)).mean()
    return LossValue(value=value, components={"bce": _scalar(value)})


def main_task_loss(pred_box: MaskProb, gt: GroundTruthMask | torch.Tensor) -> LossValue:
    dice = dice_loss(pred_box, gt)
    bce = bce_loss(pred_box, gt)
    value = dice.value + bce.value
    return LossValue(
        value=value, components={"dice": dice.components["dice"], "bce": bce.components["bce"]}
    )


def aux_task_loss(pred_point: MaskProb, gt: GroundTruthMask | torch.Tensor) -> LossValue:
    return bce_loss(pred_point, gt)


def train_loss(main: LossValue, aux: LossValue, lambda_aux: float = DEFAULT_LAMBDA) -> LossValue:
    """L_train = main + lambda_aux * aux."""
    value = main.value + lambda_aux * aux.value
    return LossValue(
        value=value, components={"main": main.item(), "aux": aux.item(), "lambda": lambda_aux}
    )


def consistency_loss(m1: MaskProb, m2: MaskProb) -> LossValue:
    if tuple(m1.shape) != tuple(m2.shape):
        raise ShapeError(MSG_SHAPE_MISMATCH.format(left=tuple(m1.shape), right=tuple(m2.shape)))
    value = ((m1 - m2) ** 2).mean()
    return LossValue(value=value, components={"consistency": _scalar(value)})


def rotation_prediction_loss(logits: torch.Tensor, targets: torch.Tensor) -> LossValue:
    """Mean cross-entropy of (B, 4) logits against quarter-turn indices (B,)."""
    value = F.cross_entropy(logits, targets)
    return LossValue(value=value, components={"rotation": _scalar(value)})


def masked_reconstruction_loss(
    recon: torch.Tensor, target: torch.Tensor, mask: torch.Tensor
) -> LossValue:
    """
    Mean squared error over pixels where `mask` is set.

    An empty mask gives a loss of exactly 0 (still attached to the graph).
    """
    if tuple(recon.shape) != tuple(target.shape):
        raise ShapeError(
            MSG_SHAPE_MISMATCH.format(left=tuple(recon.shape), right=tuple(target.shape))
        )
    weights = mask.expand_as(recon).to(recon.dtype)
    n_masked = weights.sum()
    squared = ((recon - target) ** 2) * weights
    if float(n_masked) == 0.0:
        value = squared.sum()
    else:
        value = squared.sum() / n_masked
    return LossValue(value=value, components={"reconstruction": _scalar(value)})
