"""
Source-domain training.

Jointly optimizes the encoder, prompt encoder and both decoders under
L_train = L_main(box) + lambda * L_aux(point). When baseline pretraining is
enabled, the rotation and reconstruction heads are trained alongside with a
small weight so the baseline TTT strategies start from a meaningful head.

Training samples are (video, frame, anatomy) instances. Each epoch draws a
seeded permutation of the instances, applies random crop-resize and
horizontal flip, and derives prompts from the (augmented) ground truth:
a jittered bounding box and a uniformly drawn foreground point.

Functions:
    make_optimizer(): Adam over a parameter iterable.
    create_optimizer_state(): Adam over the components trained at source time.
    box_from_mask(): (Jittered) bounding box of a binary mask.
    build_instance_index(): Every (video, frame, anatomy) with a non-empty mask.
    make_sample(): One augmented, prompted training sample.
    batch_losses(): L_train (and components) for a batch.
    train_step(): One Adam update on a batch.
    fit(): Full training loop with the saturation LR schedule.
    update_lr_on_saturation(): Drop the LR after a loss plateau.
    finite_difference_gradient(): Central-difference gradient oracle.
    analytic_gradient(): Autograd gradient at selected coordinates.
    gradient_check(): Compare the two on random coordinates.
"""

# ---------------------------------------------------------------------
# Imports
# ---------------------------------------------------------------------

from __future__ import annotations

import copy
import math
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass
from typing import NamedTuple, Protocol

import numpy as np
import numpy.typing as npt
import torch
import torch.nn.functional as F  # noqa: N812
from torch import nn

from prompt_ttt.constants import ADAM_BETAS, ADAM_EPS, FD_RELATIVE_FLOOR
from prompt_ttt.core.losses import aux_task_loss, main_task_loss, train_loss
from prompt_ttt.core.model import ModelParams, box_coords, init_params, point_coords
from prompt_ttt.core.pretext import reconstruction_loss, rotation_loss
from prompt_ttt.exceptions import ConfigurationError, OracleError, SamplingError, TrainingError
from prompt_ttt.types import (
    ArchConfig,
    BoxPrompt,
    LossValue,
    OptimizerState,
    PointPrompt,
    TrainConfig,
    TrainHistory,
    VideoSequence,
)
from prompt_ttt.utils.logger_setup import get_logger
from prompt_ttt.utils.seeding import make_rng

__all__ = [
    "GradientCheckResult",
    "TrainSample",
    "analytic_gradient",
    "batch_losses",
    "box_from_mask",
    "build_instance_index",
    "create_optimizer_state",
    "finite_difference_gradient",
    "fit",
    "gradient_check",
    "make_optimizer",
    "make_sample",
    "sample_coordinates",
    "train_step",
    "update_lr_on_saturation",
]

logger = get_logger()

# ---------------------------------------------------------------------
# Message Constants
# ---------------------------------------------------------------------

MSG_EMPTY_DATASET = "Training dataset has no annotated instances."
MSG_EMPTY_BATCH = "Training batch is empty."
MSG_EMPTY_MASK = "Cannot derive prompts from an empty mask."
MSG_NONFINITE_LOSS = "Non-finite training loss {value} at optimizer step {step} (sample {sample})."
MSG_FD_EPSILON = "Finite-difference epsilon must be > 0, got {epsilon}."
MSG_FD_INDEX = "Invalid parameter coordinate {index}."
MSG_FD_NONFINITE = "Non-finite loss evaluation at coordinate {index}."

SOURCE_COMPONENTS = ("encoder", "prompt_encoder", "dseg", "daux")
BASELINE_COMPONENTS = ("rot_head", "recon_head")

# ---------------------------------------------------------------------
# Optimizer
# ---------------------------------------------------------------------


def make_optimizer(parameters: Iterable[nn.Parameter], learning_rate: float) -> OptimizerState:
    optimizer = torch.optim.Adam(
        list(parameters), lr=learning_rate, betas=ADAM_BETAS, eps=ADAM_EPS
    )
    return OptimizerState(optimizer=optimizer, learning_rate=learning_rate)


def create_optimizer_state(params: ModelParams, config: TrainConfig) -> OptimizerState:
    """Adam over the source-trained components (plus baseline heads when enabled)."""
    names = SOURCE_COMPONENTS + (BASELINE_COMPONENTS if config.pretrain_baseline_heads else ())
    parameters = [p for name in names for p in params.component(name).parameters()]
    return make_optimizer(parameters, config.learning_rate)


class SaturationPolicy(Protocol):
    lr_drop_factor: float
    saturation_patience: int
    saturation_tolerance: float


def update_lr_on_saturation(
    history: TrainHistory | Sequence[float], opt: OptimizerState, config: SaturationPolicy
) -> OptimizerState:
    """
    Track the best loss; drop the LR after `saturation_patience` stale updates.

    An update is stale unless the latest loss beats the best so far by more
    than `saturation_tolerance` relative to the best. After a drop the stale
    counter restarts. Call once per epoch (or once per TTT step).
    """
    losses = history.train_loss if isinstance(history, TrainHistory) else history
    if not losses:
        return opt
    current = float(losses[-1])
    best = opt.best_loss
    if best is None or current < best - config.saturation_tolerance * abs(best):
        opt.stale_count = 0
    else:
        opt.stale_count += 1
    opt.best_loss = current if best is None else min(best, current)

    if opt.stale_count >= config.saturation_patience:
        new_lr = opt.learning_rate * config.lr_drop_factor
        logger.info(
            f"Loss saturated for {opt.stale_count} updates; "
            f"learning rate {opt.learning_rate:.3g} -> {new_lr:.3g}"
        )
        opt.set_learning_rate(new_lr)
        opt.stale_count = 0
    return opt


# ---------------------------------------------------------------------
# Samples
# ---------------------------------------------------------------------


class TrainSample(NamedTuple):
    image: torch.Tensor
    box: BoxPrompt
    point: PointPrompt
    gt: npt.NDArray[np.uint8]
    source: str


def box_from_mask(
    mask: npt.NDArray[np.uint8], jitter: float = 0.0, rng: np.random.Generator | None = None
) -> BoxPrompt:
    """
    Tight pixel-edge bounding box of a mask; each side optionally moved by up
    to `jitter` times the box side length, clipped to the image.

    Raises:
        SamplingError: If the mask is empty.
    """
    rows, cols = np.nonzero(mask)
    if rows.size == 0:
        raise SamplingError(MSG_EMPTY_MASK)
    height, width = mask.shape
    x_min, x_max = float(cols.min()), float(cols.max() + 1)
    y_min, y_max = float(rows.min()), float(rows.max() + 1)
    if jitter > 0 and rng is not None:
        side_w, side_h = x_max - x_min, y_max - y_min
        dx0, dy0, dx1, dy1 = rng.uniform(-jitter, jitter, size=4)
        x_min = min(max(x_min + dx0 * side_w, 0.0), width - 1.0)
        y_min = min(max(y_min + dy0 * side_h, 0.0), height - 1.0)
        x_max = max(min(x_max + dx1 * side_w, float(width)), x_min + 1.0)
        y_max = max(min(y_max + dy1 * side_h, float(height)), y_min + 1.0)
    return BoxPrompt(x_min=x_min, y_min=y_min, x_max=x_max, y_max=y_max)


def _random_point(mask: npt.NDArray[np.uint8], rng: np.random.Generator) -> PointPrompt:
    rows, cols = np.nonzero(mask)
    if rows.size == 0:
        raise SamplingError(MSG_EMPTY_MASK)
    pick = int(rng.integers(rows.size))
    return PointPrompt(x=float(cols[pick]), y=float(rows[pick]))


def build_instance_index(videos: Sequence[VideoSequence]) -> list[tuple[int, int, int]]:
    """(video index, frame, label code) for every non-empty anatomy mask."""
    index = []
    for v, video in enumerate(videos):
        frames, channels = np.nonzero(video.present)
        index.extend((v, int(t), int(c) + 1) for t, c in zip(frames, channels, strict=True))
    return index


def _crop_resize(
    image: torch.Tensor, mask: npt.NDArray[np.uint8], config: TrainConfig, rng: np.random.Generator
) -> tuple[torch.Tensor, npt.NDArray[np.uint8]]:
    height, width = mask.shape
    scale = rng.uniform(config.crop_scale_min, 1.0)
    crop_h, crop_w = max(1, round(height * scale)), max(1, round(width * scale))
    top = int(rng.integers(0, height - crop_h + 1))
    left = int(rng.integers(0, width - crop_w + 1))
    patch = image[top : top + crop_h, left : left + crop_w][None, None]
    resized = F.interpolate(patch, size=(height, width), mode="bilinear", align_corners=False)
    mask_patch = torch.from_numpy(mask[top : top + crop_h, left : left + crop_w].copy())
    mask_resized = F.interpolate(
        mask_patch[None, None].float(), size=(height, width), mode="nearest"
    )
    return resized[0, 0].clamp(0.0, 1.0), mask_resized[0, 0].to(torch.uint8).numpy()


def make_sample(
    video: VideoSequence,
    frame: int,
    code: int,
    config: TrainConfig,
    rng: np.random.Generator,
) -> TrainSample:
    """
    One training instance with online augmentation and prompts drawn from its mask.

    If cropping removes the whole mask, the uncropped frame is used.
    """
    image = torch.from_numpy(video.frames[frame].copy())
    mask = video.anatomy_mask(frame, code).copy()
    if config.augment:
        cropped, cropped_mask = _crop_resize(image, mask, config, rng)
        if cropped_mask.any():
            image, mask = cropped, cropped_mask
        if rng.random() < config.hflip_prob:
            image = torch.flip(image, dims=(-1,))
            mask = np.ascontiguousarray(mask[:, ::-1])
    box = box_from_mask(mask, config.box_jitter, rng)
    point = _random_point(mask, rng)
    return TrainSample(
        image=image, box=box, point=point, gt=mask, source=f"{video.video_id}/{frame}/{code}"
    )


# ---------------------------------------------------------------------
# Steps
# ---------------------------------------------------------------------


def _stack_batch(
    batch: Sequence[TrainSample], dtype: torch.dtype
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor, torch.Tensor]:
    height, width = batch[0].gt.shape
    images = torch.stack([s.image for s in batch])[:, None].to(dtype)
    boxes = torch.stack([box_coords(s.box, height, width, dtype) for s in batch])
    points = torch.stack([point_coords([s.point], height, width, dtype) for s in batch])
    gts = torch.from_numpy(np.stack([s.gt for s in batch]))[:, None].to(dtype)
    return images, boxes, points, gts


def batch_losses(
    params: ModelParams, batch: Sequence[TrainSample], config: TrainConfig
) -> tuple[LossValue, torch.Tensor, torch.Tensor]:
    """
    L_train for a batch, plus the box- and point-prompted predictions.

    Main and auxiliary predictions share one encoder pass.
    """
    dtype = next(params.parameters()).dtype
    images, boxes, points, gts = _stack_batch(batch, dtype)
    size = (images.shape[-2], images.shape[-1])
    features = params.encode(images)
    pred_box = torch.sigmoid(params.main_logits_from_features(features, boxes, size))
    pred_point = torch.sigmoid(params.aux_logits_from_features(features, points, size))
    main = main_task_loss(pred_box, gts)
    aux = aux_task_loss(pred_point, gts)
    total = train_loss(main, aux, config.lambda_aux)
    total.components.update(main.components)
    return total, pred_box, pred_point


def _offending_sample(batch: Sequence[TrainSample], *preds: torch.Tensor) -> str:
    for i, sample in enumerate(batch):
        if not bool(torch.isfinite(sample.image).all()):
            return sample.source
        if any(not bool(torch.isfinite(p[i]).all()) for p in preds):
            return sample.source
    return batch[0].source


def train_step(
    batch: Sequence[TrainSample],
    params: ModelParams,
    opt: OptimizerState,
    config: TrainConfig,
) -> tuple[ModelParams, OptimizerState, LossValue]:
    """
    One joint Adam update on the batch-mean L_train (plus baseline head terms).

    Returns the pre-update loss. Parameters are updated in place.

    Raises:
        TrainingError: If the loss is not finite.
    """
    if not batch:
        raise ConfigurationError(MSG_EMPTY_BATCH)
    total, pred_box, pred_point = batch_losses(params, batch, config)
    objective = total.value
    components = dict(total.components)

    if config.pretrain_baseline_heads and config.baseline_weight > 0:
        dtype = next(params.parameters()).dtype
        images = torch.stack([s.image for s in batch])[:, None].to(dtype)
        rng = make_rng(config.seed, opt.step, 1)
        rot = rotation_loss(params, images, rng)
        recon = reconstruction_loss(
            params, images, rng, config.mae_mask_ratio, config.mae_patch_size
        )
        objective = objective + config.baseline_weight * (rot.value + recon.value)
        components.update(rot.components)
        components.update(recon.components)

    if not bool(torch.isfinite(objective)):
        raise TrainingError(
            MSG_NONFINITE_LOSS.format(
                value=float(objective.detach()),
                step=opt.step,
                sample=_offending_sample(batch, pred_box, pred_point),
            )
        )

    opt.optimizer.zero_grad(set_to_none=True)
    objective.backward()
    opt.optimizer.step()
    opt.optimizer.zero_grad(set_to_none=True)
    opt.step += 1
    logger.debug(f"train step {opt.step}: L_train={total.item():.6f}")
    return params, opt, LossValue(value=total.value.detach(), components=components)


# ---------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------


def fit(
    dataset: Sequence[VideoSequence],
    config: TrainConfig,
    arch: ArchConfig | None = None,
    params: ModelParams | None = None,
    on_epoch_end: Callable[[int, TrainHistory], None] | None = None,
) -> tuple[ModelParams, TrainHistory]:
    """
    Train on the source videos.

    Args:
        dataset: Training videos.
        config: Training configuration.
        arch: Architecture for fresh parameters (ignored when `params` is given).
        params: Optional starting parameters (trained in place).
        on_epoch_end: Optional callback after each epoch.

    Returns:
        The trained parameters and the per-epoch history; `history.opt_state`
        holds the final optimizer.

    Raises:
        ConfigurationError: If the dataset has no annotated instances.
    """
    config.validate()
    index = build_instance_index(dataset)
    if not index:
        raise ConfigurationError(MSG_EMPTY_DATASET)
    params = params if params is not None else init_params(config.seed, arch)
    opt = create_optimizer_state(params, config)
    history = TrainHistory()

    for epoch in range(config.epochs):
        rng = make_rng(config.seed, epoch)
        order = rng.permutation(len(index))
        if config.samples_per_epoch:
            order = order[: config.samples_per_epoch]
        lr_in_epoch = opt.learning_rate
        sums = {"train": 0.0, "main": 0.0, "aux": 0.0}
        for start in range(0, len(order), config.batch_size):
            batch = []
            for position in order[start : start + config.batch_size]:
                v, frame, code = index[int(position)]
                sample_rng = make_rng(config.seed, epoch, int(position))
                batch.append(make_sample(dataset[v], frame, code, config, sample_rng))
            _, opt, loss = train_step(batch, params, opt, config)
            sums["train"] += loss.item() * len(batch)
            sums["main"] += loss.components["main"] * len(batch)
            sums["aux"] += loss.components["aux"] * len(batch)

        n_seen = len(order)
        history.train_loss.append(sums["train"] / n_seen)
        history.main_loss.append(sums["main"] / n_seen)
        history.aux_loss.append(sums["aux"] / n_seen)
        history.learning_rates.append(lr_in_epoch)
        logger.info(
            f"epoch {epoch + 1}/{config.epochs}: L_train={history.train_loss[-1]:.5f} "
            f"L_main={history.main_loss[-1]:.5f} L_aux={history.aux_loss[-1]:.5f} "
            f"lr={lr_in_epoch:.3g}"
        )
        update_lr_on_saturation(history, opt, config)
        if opt.learning_rate < lr_in_epoch:
            history.lr_drop_epochs.append(epoch)
        if on_epoch_end is not None:
            on_epoch_end(epoch, history)

    history.opt_state = opt
    return params, history


# ---------------------------------------------------------------------
# Gradient oracle
# ---------------------------------------------------------------------

Coordinate = tuple[str, int]
"""(parameter name, flat index)."""


def _coordinate_slot(model: nn.Module, index: Coordinate) -> torch.Tensor:
    name, flat = index
    named = dict(model.named_parameters())
    if name not in named or not 0 <= flat < named[name].numel():
        raise OracleError(MSG_FD_INDEX.format(index=index))
    return named[name].data.view(-1)


def finite_difference_gradient(
    loss_evaluator: Callable[[nn.Module], torch.Tensor | float],
    params: nn.Module,
    indices: Sequence[Coordinate],
    epsilon: float,
) -> npt.NDArray[np.float64]:
    """
    Central differences (f(theta + eps) - f(theta - eps)) / (2 eps) per coordinate.

    Evaluated on a float64 copy of `params`; the input is left untouched.

    Raises:
        OracleError: If epsilon <= 0, a coordinate is invalid, or f is not finite.
    """
    if not epsilon > 0:
        raise OracleError(MSG_FD_EPSILON.format(epsilon=epsilon))
    work = copy.deepcopy(params).double()
    estimates = np.empty(len(indices), dtype=np.float64)
    with torch.no_grad():
        for i, index in enumerate(indices):
            slot = _coordinate_slot(work, index)
            flat = index[1]
            original = slot[flat].item()
            slot[flat] = original + epsilon
            f_plus = float(loss_evaluator(work))
            slot[flat] = original - epsilon
            f_minus = float(loss_evaluator(work))
            slot[flat] = original
            if not (math.isfinite(f_plus) and math.isfinite(f_minus)):
                raise OracleError(MSG_FD_NONFINITE.format(index=index))
            estimates[i] = (f_plus - f_minus) / (2.0 * epsilon)
    return estimates


def analytic_gradient(
    loss_evaluator: Callable[[nn.Module], torch.Tensor],
    params: nn.Module,
    indices: Sequence[Coordinate],
) -> npt.NDArray[np.float64]:
    """Autograd gradient at the given coordinates, on a float64 copy of `params`."""
    work = copy.deepcopy(params).double()
    work.zero_grad(set_to_none=True)
    loss_evaluator(work).backward()
    named = dict(work.named_parameters())
    values = []
    for index in indices:
        _coordinate_slot(work, index)
        grad = named[index[0]].grad
        values.append(0.0 if grad is None else float(grad.view(-1)[index[1]]))
    return np.asarray(values, dtype=np.float64)


@dataclass
class GradientCheckResult:
    indices: list[Coordinate]
    analytic: npt.NDArray[np.float64]
    numeric: npt.NDArray[np.float64]
    relative_errors: npt.NDArray[np.float64]

    @property
    def max_relative_error(self) -> float:
        return float(self.relative_errors.max(initial=0.0))


def sample_coordinates(params: nn.Module, n: int, seed: int) -> list[Coordinate]:
    """`n` seeded coordinates, drawn uniformly over all trainable scalars."""
    named = [(name, p.numel()) for name, p in params.named_parameters() if p.requires_grad]
    sizes = np.array([size for _, size in named])
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    flat = make_rng(seed).choice(int(offsets[-1]), size=n, replace=False)
    coords = []
    for position in np.sort(flat):
        which = int(np.searchsorted(offsets, position, side="right") - 1)
        coords.append((named[which][0], int(position - offsets[which])))
    return coords


def gradient_check(
    loss_evaluator: Callable[[nn.Module], torch.Tensor],
    params: nn.Module,
    n_coords: int = 100,
    epsilon: float = 1e-6,
    seed: int = 0,
) -> GradientCheckResult:
    """
    Compare autograd and central-difference gradients on random coordinates.

    Relative error is |a - n| / max(|a|, |n|, FD_RELATIVE_FLOOR).
    """
    indices = sample_coordinates(params, n_coords, seed)
    analytic = analytic_gradient(loss_evaluator, params, indices)
    numeric = finite_difference_gradient(loss_evaluator, params, indices, epsilon)
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), FD_RELATIVE_FLOOR)
    return GradientCheckResult(
        indices=indices,
        analytic=analytic,
        numeric=numeric,
        relative_errors=np.abs(analytic - numeric) / scale,
    )
