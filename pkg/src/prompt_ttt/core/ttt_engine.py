"""
Test-time training.

Prompt-TTT adapts only the image encoder. For every step two augmented
views of the frame are prompted with two independently drawn point sets
from the same target mask; the auxiliary decoder predicts a mask for each
view, both masks are mapped back to the original pixel grid, and their mean
squared difference is minimized. All decoders, the prompt encoder and the
baseline heads stay frozen.

Video adaptation runs K loops over all frames. Encoder weights and optimizer
state carry over from frame to frame and from loop to loop; final masks come
from the adapted encoder with the original box-prompted decoder.

Geometric augmentation order: horizontal flip, vertical flip, then clockwise
rotation by the given right angle. A point (x, y) in a W x H image rotated
90 degrees clockwise lands at (H - 1 - y, x).

Functions:
    sample_point_prompts(): Distinct foreground pixel centers.
    sample_augmentation(): Random AugmentationSpec within TTTConfig ranges.
    apply_augmentation(): Transform an image and its points.
    invert_geometric(): Undo the geometric part of a spec on a mask.
    make_ttt_optimizer(): Adam over the encoder only.
    ttt_consistency_step(): One Prompt-TTT update.
    rotation_ttt_step(), mae_ttt_step(): Baseline TTT updates.
    ttt_video(): K-loop Prompt-TTT over a video.
    baseline_ttt_video(): K-loop rotation or MAE TTT with the same budget.
    infer_after_ttt(): Box-prompted masks from the adapted model.
"""

# ---------------------------------------------------------------------
# Imports
# ---------------------------------------------------------------------

from __future__ import annotations

import contextlib
import copy
from collections.abc import Callable, Iterator, Sequence

import numpy as np
import numpy.typing as npt
import torch

from prompt_ttt.constants import ADAM_BETAS, ADAM_EPS, BaselineStrategy
from prompt_ttt.core.losses import consistency_loss
from prompt_ttt.core.model import ModelParams, forward_aux, forward_main, param_digest
from prompt_ttt.core.pretext import reconstruction_loss, rotation_loss
from prompt_ttt.core.trainer import make_optimizer, update_lr_on_saturation
from prompt_ttt.exceptions import AdaptationError, SamplingError, ValidationError
from prompt_ttt.types import (
    AugmentationSpec,
    BoxPrompt,
    GroundTruthMask,
    ImageTensor,
    LossValue,
    MaskProb,
    OptimizerState,
    PointPrompt,
    TraceRow,
    TTTConfig,
    TTTTrace,
    VideoSequence,
)
from prompt_ttt.utils.logger_setup import get_logger
from prompt_ttt.utils.seeding import derive_seed, make_rng

__all__ = [
    "apply_augmentation",
    "baseline_ttt_video",
    "infer_after_ttt",
    "invert_geometric",
    "mae_ttt_step",
    "make_ttt_optimizer",
    "rotation_ttt_step",
    "sample_augmentation",
    "sample_point_prompts",
    "ttt_consistency_step",
    "ttt_video",
]

logger = get_logger()

# ---------------------------------------------------------------------
# Message Constants
# ---------------------------------------------------------------------

MSG_TOO_FEW_PIXELS = "Mask has {available} foreground pixel(s); {n} point prompt(s) requested."
MSG_NONFINITE_TTT = "Non-finite test-time loss at optimizer step {step}."
MSG_FRAME_MASK_COUNT = "Video has {frames} frame(s) but {masks} prompt mask(s) were given."
MSG_UNKNOWN_STRATEGY = "Unknown baseline strategy {strategy!r}; expected 'rotation' or 'mae'."

StepFn = Callable[
    [ImageTensor, int, ModelParams, OptimizerState, int],
    tuple[ModelParams, OptimizerState, LossValue],
]

# ---------------------------------------------------------------------
# Prompts and augmentation
# ---------------------------------------------------------------------


def sample_point_prompts(mask: GroundTruthMask, n: int, seed: int) -> list[PointPrompt]:
    """
    `n` distinct foreground pixel centers drawn uniformly without replacement.

    Raises:
        SamplingError: If the mask has fewer than `n` foreground pixels.
    """
    rows, cols = np.nonzero(np.asarray(mask))
    if n < 1 or rows.size < n:
        raise SamplingError(MSG_TOO_FEW_PIXELS.format(available=rows.size, n=n))
    picks = np.random.default_rng(seed).choice(rows.size, size=n, replace=False)
    return [PointPrompt(x=float(cols[i]), y=float(rows[i])) for i in picks]


def sample_augmentation(config: TTTConfig, seed: int) -> AugmentationSpec:
    rng = make_rng(seed)
    return AugmentationSpec(
        rotation=int(rng.choice(config.rotations)),
        horizontal_flip=bool(rng.random() < config.hflip_prob),
        vertical_flip=bool(rng.random() < config.vflip_prob),
        gamma=float(rng.uniform(*config.gamma_range)),
        brightness_shift=float(rng.uniform(*config.brightness_range)),
        noise_sigma=float(rng.uniform(*config.noise_range)),
        seed=int(rng.integers(2**31 - 1)),
    )


def _has_photometric(spec: AugmentationSpec) -> bool:
    return spec.gamma != 1.0 or spec.brightness_shift != 0.0 or spec.noise_sigma != 0.0


def apply_augmentation(
    image: ImageTensor, points: Sequence[PointPrompt], spec: AugmentationSpec
) -> tuple[ImageTensor, list[PointPrompt]]:
    """
    Apply the geometric transform to image and points, the photometric one to the image.

    Photometric: clamp(image ** gamma + brightness + N(0, noise_sigma), 0, 1),
    with the noise drawn from `spec.seed`.
    """
    height, width = image.shape[-2:]
    out = image
    coords = [(p.x, p.y) for p in points]
    if spec.horizontal_flip:
        out = torch.flip(out, dims=(-1,))
        coords = [(width - 1 - x, y) for x, y in coords]
    if spec.vertical_flip:
        out = torch.flip(out, dims=(-2,))
        coords = [(x, height - 1 - y) for x, y in coords]
    for _ in range(spec.quarter_turns):
        out = torch.rot90(out, k=-1, dims=(-2, -1))
        coords = [(height - 1 - y, x) for x, y in coords]
        height, width = width, height

    if _has_photometric(spec):
        out = out.pow(spec.gamma) + spec.brightness_shift
        if spec.noise_sigma > 0:
            noise_rng = np.random.default_rng(spec.seed)
            noise = noise_rng.normal(0.0, spec.noise_sigma, tuple(out.shape))
            out = out + torch.from_numpy(noise).to(out.dtype)
        out = out.clamp(0.0, 1.0)

    moved = [
        PointPrompt(x=x, y=y, label=p.label) for (x, y), p in zip(coords, points, strict=True)
    ]
    return out, moved


def invert_geometric(mask: MaskProb, spec: AugmentationSpec) -> MaskProb:
    """Undo rotation, then vertical flip, then horizontal flip on the last two axes."""
    out = mask
    if spec.quarter_turns:
        out = torch.rot90(out, k=spec.quarter_turns, dims=(-2, -1))
    if spec.vertical_flip:
        out = torch.flip(out, dims=(-2,))
    if spec.horizontal_flip:
        out = torch.flip(out, dims=(-1,))
    return out


# ---------------------------------------------------------------------
# Optimizer and freezing
# ---------------------------------------------------------------------


def make_ttt_optimizer(params: ModelParams, config: TTTConfig) -> OptimizerState:
    """Adam over encoder parameters only."""
    return make_optimizer(params.encoder.parameters(), config.learning_rate)


def _rebind_optimizer(opt: OptimizerState, params: ModelParams) -> OptimizerState:
    """Move optimizer state onto the encoder parameters of another (copied) model."""
    optimizer = torch.optim.Adam(
        list(params.encoder.parameters()), lr=opt.learning_rate, betas=ADAM_BETAS, eps=ADAM_EPS
    )
    optimizer.load_state_dict(opt.optimizer.state_dict())
    return OptimizerState(
        optimizer=optimizer,
        learning_rate=opt.learning_rate,
        step=opt.step,
        best_loss=opt.best_loss,
        stale_count=opt.stale_count,
    )


@contextlib.contextmanager
def _encoder_only(params: ModelParams) -> Iterator[None]:
    frozen = [
        p for name, p in params.named_parameters() if not name.startswith("encoder.")
    ]
    previous = [p.requires_grad for p in frozen]
    for p in frozen:
        p.requires_grad_(False)
    try:
        yield
    finally:
        for p, flag in zip(frozen, previous, strict=True):
            p.requires_grad_(flag)


def _apply_update(loss: LossValue, opt: OptimizerState) -> None:
    if not bool(torch.isfinite(loss.value)):
        raise AdaptationError(MSG_NONFINITE_TTT.format(step=opt.step))
    opt.optimizer.zero_grad(set_to_none=True)
    loss.value.backward()
    opt.optimizer.step()
    opt.optimizer.zero_grad(set_to_none=True)
    opt.step += 1


def _detached(loss: LossValue) -> LossValue:
    return LossValue(value=loss.value.detach(), components=loss.components)


# ---------------------------------------------------------------------
# Steps
# ---------------------------------------------------------------------


def ttt_consistency_step(
    image: ImageTensor,
    prompt_source_mask: GroundTruthMask,
    params: ModelParams,
    opt: OptimizerState,
    config: TTTConfig,
    step_seed: int,
) -> tuple[ModelParams, OptimizerState, LossValue]:
    """
    One encoder-only Adam step on the two-view consistency loss.

    The two branches run as separate forward passes and join at the loss.
    Returns the pre-update loss.

    Raises:
        SamplingError: If the mask has fewer than n_points foreground pixels.
        AdaptationError: If the loss is not finite.
    """
    specs = [sample_augmentation(config, derive_seed(step_seed, branch)) for branch in (1, 2)]
    prompt_sets = [
        sample_point_prompts(prompt_source_mask, config.n_points, derive_seed(step_seed, branch))
        for branch in (3, 4)
    ]
    with _encoder_only(params):
        masks = []
        for spec, points in zip(specs, prompt_sets, strict=True):
            view, view_points = apply_augmentation(image, points, spec)
            masks.append(invert_geometric(forward_aux(view, view_points, params), spec))
        loss = consistency_loss(masks[0], masks[1])
        _apply_update(loss, opt)
    return params, opt, _detached(loss)


def rotation_ttt_step(
    image: ImageTensor,
    params: ModelParams,
    opt: OptimizerState,
    config: TTTConfig,
    step_seed: int,
) -> tuple[ModelParams, OptimizerState, LossValue]:
    """Rotation-prediction step: 4-way cross-entropy of the frozen rot_head."""
    del config
    dtype = next(params.parameters()).dtype
    with _encoder_only(params):
        loss = rotation_loss(params, image.to(dtype)[None, None], make_rng(step_seed))
        _apply_update(loss, opt)
    return params, opt, _detached(loss)


def mae_ttt_step(
    image: ImageTensor,
    params: ModelParams,
    opt: OptimizerState,
    config: TTTConfig,
    step_seed: int,
) -> tuple[ModelParams, OptimizerState, LossValue]:
    """Masked-reconstruction step; error is measured on masked patches only."""
    dtype = next(params.parameters()).dtype
    with _encoder_only(params):
        loss = reconstruction_loss(
            params,
            image.to(dtype)[None, None],
            make_rng(step_seed),
            config.mae_mask_ratio,
            config.mae_patch_size,
        )
        _apply_update(loss, opt)
    return params, opt, _detached(loss)


# ---------------------------------------------------------------------
# Video loops
# ---------------------------------------------------------------------


def _run_video(
    video: VideoSequence,
    params: ModelParams,
    config: TTTConfig,
    step_fn: StepFn,
    opt: OptimizerState | None,
    start_loop: int,
) -> tuple[ModelParams, TTTTrace]:
    config.validate()
    adapted = copy.deepcopy(params)
    opt = make_ttt_optimizer(adapted, config) if opt is None else _rebind_optimizer(opt, adapted)
    trace = TTTTrace(encoder_digests=[param_digest(adapted, "encoder")])
    recent: list[float] = []

    for loop in range(start_loop, start_loop + config.loops):
        for t in range(video.n_frames):
            frame = torch.from_numpy(video.frames[t].copy())
            for step in range(config.steps_per_frame):
                lr_used = opt.learning_rate
                seed = derive_seed(config.seed, loop, t, step)
                _, opt, loss = step_fn(frame, t, adapted, opt, seed)
                trace.rows.append(TraceRow(loop=loop, frame=t, step=step, loss=loss.item()))
                trace.learning_rates.append(lr_used)
                recent.append(loss.item())
                update_lr_on_saturation(recent, opt, config)
                logger.debug(
                    f"{video.video_id} loop {loop} frame {t} step {step}: {loss.item():.6g}"
                )
        trace.encoder_digests.append(param_digest(adapted, "encoder"))
        logger.info(f"{video.video_id}: loop {loop} mean TTT loss {trace.loop_mean(loop):.6g}")

    trace.opt_state = opt
    return adapted, trace


def ttt_video(
    video: VideoSequence,
    prompt_masks: Sequence[GroundTruthMask] | npt.NDArray[np.uint8],
    params: ModelParams,
    config: TTTConfig,
    *,
    opt: OptimizerState | None = None,
    start_loop: int = 0,
) -> tuple[ModelParams, TTTTrace]:
    """
    K-loop Prompt-TTT over a video; returns an adapted copy and the trace.

    `params` is not modified. Passing the `opt_state` of a previous trace and
    `start_loop` equal to the loops already run continues that adaptation
    with the same seed stream.

    Raises:
        ValidationError: If the number of prompt masks differs from the frame count.
    """
    if len(prompt_masks) != video.n_frames:
        raise ValidationError(
            MSG_FRAME_MASK_COUNT.format(frames=video.n_frames, masks=len(prompt_masks))
        )

    def step_fn(
        frame: ImageTensor, t: int, model: ModelParams, state: OptimizerState, seed: int
    ) -> tuple[ModelParams, OptimizerState, LossValue]:
        return ttt_consistency_step(frame, prompt_masks[t], model, state, config, seed)

    return _run_video(video, params, config, step_fn, opt, start_loop)


def baseline_ttt_video(
    video: VideoSequence,
    params: ModelParams,
    config: TTTConfig,
    strategy: BaselineStrategy,
    *,
    opt: OptimizerState | None = None,
    start_loop: int = 0,
) -> tuple[ModelParams, TTTTrace]:
    """Rotation or MAE TTT under the same loop/frame/step schedule as Prompt-TTT."""
    if strategy == "rotation":
        base_step = rotation_ttt_step
    elif strategy == "mae":
        base_step = mae_ttt_step
    else:
        raise ValidationError(MSG_UNKNOWN_STRATEGY.format(strategy=strategy))

    def step_fn(
        frame: ImageTensor, t: int, model: ModelParams, state: OptimizerState, seed: int
    ) -> tuple[ModelParams, OptimizerState, LossValue]:
        del t
        return base_step(frame, model, state, config, seed)

    return _run_video(video, params, config, step_fn, opt, start_loop)


def infer_after_ttt(frame: ImageTensor, box: BoxPrompt, params: ModelParams) -> MaskProb:
    """Box-prompted mask from the (adapted) encoder and the original main decoder."""
    with torch.no_grad():
        return forward_main(frame, box, params)
