"""
Type definitions and reusable dataclasses for prompt_ttt.

Defines:
- Tensor aliases: ImageTensor, MaskProb, GroundTruthMask, FeatureMap.
- Prompts: PointPrompt, BoxPrompt, PromptEmbedding.
- Configuration: ArchConfig, TrainConfig, TTTConfig, SynthConfig, ShiftSpec,
  EvalConfig, AblationConfig, OutputConfig.
- Test-time augmentation: AugmentationSpec.
- Training/adaptation state: LossValue, OptimizerState, TrainHistory, TTTTrace.
- Data: VideoSequence, VideoEntry, DatasetManifest.
- Evaluation: MetricsRecord.
"""

# ---------------------------------------------------------------------
# Imports
# ---------------------------------------------------------------------

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, NamedTuple

import numpy as np
import numpy.typing as npt
import torch

from prompt_ttt.constants import (
    DEFAULT_BATCH_SIZE,
    DEFAULT_BOX_JITTER,
    DEFAULT_LAMBDA,
    DEFAULT_LR_DROP_FACTOR,
    DEFAULT_PROMPT_ANATOMY,
    DEFAULT_SATURATION_PATIENCE,
    DEFAULT_SATURATION_TOLERANCE,
    DEFAULT_THRESHOLD,
    DEFAULT_TRAIN_LR,
    DEFAULT_TTT_LR,
    NUM_ANATOMIES,
    VALID_ROTATIONS,
)
from prompt_ttt.exceptions import ConfigurationError, ValidationError

# ---------------------------------------------------------------------
# Tensor aliases
# ---------------------------------------------------------------------

ImageTensor = torch.Tensor
"""(H, W) intensities in [0, 1]."""

MaskProb = torch.Tensor
"""(H, W) probabilities in [0, 1]."""

GroundTruthMask = npt.NDArray[np.uint8]
"""(H, W) binary mask with values exactly 0 or 1."""

FeatureMap = torch.Tensor
"""(d, H / s, W / s) encoder output."""

# ---------------------------------------------------------------------
# Message Constants
# ---------------------------------------------------------------------

MSG_POINT_OOB = "Point ({x}, {y}) lies outside a {width}x{height} image."
MSG_BOX_ORDER = "Box requires x_min < x_max and y_min < y_max, got {box}."
MSG_BOX_OOB = "Box {box} exceeds a {width}x{height} image."
MSG_ARCH_DIMS = "Invalid architecture: {reason}."
MSG_CONFIG_RANGE = "Invalid {section} config: {reason}."
MSG_ROTATION = "Rotation must be one of {valid}, got {value}."

# ---------------------------------------------------------------------
# Prompts
# ---------------------------------------------------------------------


@dataclass(frozen=True)
class PointPrompt:
    x: float
    y: float
    label: int = 1

    def validate(self, height: int, width: int) -> None:
        if not (0 <= self.x < width and 0 <= self.y < height):
            raise ValidationError(
                MSG_POINT_OOB.format(x=self.x, y=self.y, width=width, height=height)
            )


@dataclass(frozen=True)
class BoxPrompt:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def validate(self, height: int, width: int) -> None:
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValidationError(MSG_BOX_ORDER.format(box=self))
        if self.x_min < 0 or self.y_min < 0 or self.x_max > width or self.y_max > height:
            raise ValidationError(MSG_BOX_OOB.format(box=self, width=width, height=height))

    def corners(self) -> tuple[tuple[float, float], tuple[float, float]]:
        return (self.x_min, self.y_min), (self.x_max, self.y_max)


@dataclass
class PromptEmbedding:
    """Prompt tokens of shape (N, d); kind is "point" or "box"."""

    tokens: torch.Tensor
    kind: str

    @property
    def n_tokens(self) -> int:
        return int(self.tokens.shape[0])


# ---------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------


@dataclass
class ArchConfig:
    """Layer sizes of the desk-scale promptable segmentation network.

    Each encoder stage halves the resolution, so `downsample` must equal
    2 ** len(stage_channels).
    """

    stage_channels: list[int] = field(default_factory=lambda: [16, 32, 48, 64])
    embed_dim: int = 64
    downsample: int = 16
    decoder_channels: list[int] = field(default_factory=lambda: [32, 16])
    init_scale: float = 1.0
    pe_octaves: float = 6.0

    def validate(self) -> None:
        if self.embed_dim <= 0:
            raise ConfigurationError(MSG_ARCH_DIMS.format(reason="embed_dim must be positive"))
        if self.embed_dim % 4:
            raise ConfigurationError(
                MSG_ARCH_DIMS.format(reason="embed_dim must be divisible by 4")
            )
        if not self.stage_channels or any(c <= 0 for c in self.stage_channels):
            raise ConfigurationError(
                MSG_ARCH_DIMS.format(reason="stage_channels must be positive and non-empty")
            )
        if len(self.decoder_channels) != 2 or any(c <= 0 for c in self.decoder_channels):
            raise ConfigurationError(
                MSG_ARCH_DIMS.format(reason="decoder_channels must list two positive sizes")
            )
        if self.downsample != 2 ** len(self.stage_channels):
            raise ConfigurationError(
                MSG_ARCH_DIMS.format(
                    reason=(
                        f"downsample={self.downsample} but {len(self.stage_channels)} "
                        f"stages give {2 ** len(self.stage_channels)}"
                    )
                )
            )
        if not self.init_scale > 0:
            raise ConfigurationError(MSG_ARCH_DIMS.format(reason="init_scale must be positive"))
        if self.pe_octaves < 0:
            raise ConfigurationError(MSG_ARCH_DIMS.format(reason="pe_octaves must be >= 0"))


def _saturation_problems(config: TrainConfig | TTTConfig) -> list[str]:
    problems = []
    if not 0 < config.lr_drop_factor < 1:
        problems.append("lr_drop_factor must lie in (0, 1)")
    if config.saturation_patience < 1:
        problems.append("saturation_patience must be >= 1")
    if config.saturation_tolerance < 0:
        problems.append("saturation_tolerance must be >= 0")
    return problems


@dataclass
class TrainConfig:
    lambda_aux: float = DEFAULT_LAMBDA
    learning_rate: float = DEFAULT_TRAIN_LR
    batch_size: int = DEFAULT_BATCH_SIZE
    epochs: int = 20
    seed: int = 0
    lr_drop_factor: float = DEFAULT_LR_DROP_FACTOR
    saturation_patience: int = DEFAULT_SATURATION_PATIENCE
    saturation_tolerance: float = DEFAULT_SATURATION_TOLERANCE
    box_jitter: float = DEFAULT_BOX_JITTER
    augment: bool = True
    crop_scale_min: float = 0.8
    hflip_prob: float = 0.5
    samples_per_epoch: int = 192
    pretrain_baseline_heads: bool = True
    baseline_weight: float = 0.1
    mae_mask_ratio: float = 0.5
    mae_patch_size: int = 16

    def validate(self) -> None:
        problems = []
        if self.lambda_aux < 0:
            problems.append("lambda_aux must be >= 0")
        if not self.learning_rate > 0:
            problems.append("learning_rate must be > 0")
        if self.batch_size < 1:
            problems.append("batch_size must be >= 1")
        if self.epochs < 0:
            problems.append("epochs must be >= 0")
        problems.extend(_saturation_problems(self))
        if not 0 < self.crop_scale_min <= 1:
            problems.append("crop_scale_min must lie in (0, 1]")
        if not 0 <= self.mae_mask_ratio <= 1:
            problems.append("mae_mask_ratio must lie in [0, 1]")
        if self.samples_per_epoch < 0:
            problems.append("samples_per_epoch must be >= 0 (0 means all)")
        if problems:
            raise ConfigurationError(
                MSG_CONFIG_RANGE.format(section="trainer", reason="; ".join(problems))
            )


@dataclass
class TTTConfig:
    learning_rate: float = DEFAULT_TTT_LR
    steps_per_frame: int = 5
    loops: int = 3
    n_points: int = 1
    seed: int = 0
    rotations: list[int] = field(default_factory=lambda: list(VALID_ROTATIONS))
    hflip_prob: float = 0.5
    vflip_prob: float = 0.5
    gamma_range: list[float] = field(default_factory=lambda: [0.7, 1.4])
    brightness_range: list[float] = field(default_factory=lambda: [-0.1, 0.1])
    noise_range: list[float] = field(default_factory=lambda: [0.0, 0.05])
    lr_drop_factor: float = DEFAULT_LR_DROP_FACTOR
    saturation_patience: int = DEFAULT_SATURATION_PATIENCE
    saturation_tolerance: float = DEFAULT_SATURATION_TOLERANCE
    mae_mask_ratio: float = 0.5
    mae_patch_size: int = 16

    def validate(self) -> None:
        problems = []
        if self.learning_rate < 0:
            problems.append("learning_rate must be >= 0")
        if self.steps_per_frame < 0:
            problems.append("steps_per_frame must be >= 0")
        if self.loops < 1:
            problems.append("loops (K) must be >= 1")
        if self.n_points < 1:
            problems.append("n_points must be >= 1")
        if not self.rotations or any(r not in VALID_ROTATIONS for r in self.rotations):
            problems.append(f"rotations must be a non-empty subset of {VALID_ROTATIONS}")
        for name, bounds, (bound_lo, bound_hi) in (
            ("gamma_range", self.gamma_range, (0.5, 2.0)),
            ("brightness_range", self.brightness_range, (-0.2, 0.2)),
            ("noise_range", self.noise_range, (0.0, 0.1)),
        ):
            if len(bounds) != 2:
                problems.append(f"{name} must be a [lo, hi] pair, got {list(bounds)}")
                continue
            lo, hi = bounds
            if not bound_lo <= lo <= hi <= bound_hi:
                problems.append(f"{name} must satisfy {bound_lo} <= lo <= hi <= {bound_hi}")
        problems.extend(_saturation_problems(self))
        if not 0 <= self.mae_mask_ratio <= 1:
            problems.append("mae_mask_ratio must lie in [0, 1]")
        if problems:
            raise ConfigurationError(
                MSG_CONFIG_RANGE.format(section="ttt", reason="; ".join(problems))
            )


@dataclass
class ShiftSpec:
    gamma: float = 1.0
    noise_sigma: float = 0.0
    brightness: float = 0.0
    contrast: float = 1.0
    seed: int = 0

    def is_identity(self) -> bool:
        return (
            self.gamma == 1.0
            and self.noise_sigma == 0.0
            and self.brightness == 0.0
            and self.contrast == 1.0
        )


@dataclass
class SynthConfig:
    n_videos: int = 10
    n_frames: int = 24
    height: int = 256
    width: int = 256
    downsample: int = 16
    seed: int = 0
    blur_sigma: float = 1.0
    texture_amplitude: float = 0.05
    max_bolus_step: float = 0.06
    shift: ShiftSpec = field(default_factory=lambda: ShiftSpec(gamma=0.6, noise_sigma=0.1))

    def validate(self) -> None:
        problems = []
        if self.n_frames < 1:
            problems.append("n_frames must be >= 1")
        if self.n_videos < 1:
            problems.append("n_videos must be >= 1")
        if self.height <= 0 or self.width <= 0:
            problems.append("height and width must be positive")
        elif self.height % self.downsample or self.width % self.downsample:
            problems.append(
                f"resolution {self.width}x{self.height} not divisible by {self.downsample}"
            )
        if problems:
            raise ConfigurationError(
                MSG_CONFIG_RANGE.format(section="synth", reason="; ".join(problems))
            )


@dataclass
class EvalConfig:
    mode: str = "none"
    prompt_anatomy: str = DEFAULT_PROMPT_ANATOMY
    threshold: float = DEFAULT_THRESHOLD
    domain: str = "target"
    oracle: bool = False


@dataclass
class AblationConfig:
    n_points_list: list[int] = field(default_factory=lambda: [1, 3, 5])


@dataclass
class OutputConfig:
    out_dir: str = "runs"


# ---------------------------------------------------------------------
# Test-time augmentation
# ---------------------------------------------------------------------


@dataclass(frozen=True)
class AugmentationSpec:
    """Right-angle rotation and flips (exactly invertible) plus photometric changes.

    Geometric order: horizontal flip, vertical flip, then clockwise rotation.
    """

    rotation: int = 0
    horizontal_flip: bool = False
    vertical_flip: bool = False
    gamma: float = 1.0
    brightness_shift: float = 0.0
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.rotation not in VALID_ROTATIONS:
            raise ValidationError(MSG_ROTATION.format(valid=VALID_ROTATIONS, value=self.rotation))

    @classmethod
    def identity(cls) -> AugmentationSpec:
        return cls()

    @property
    def quarter_turns(self) -> int:
        return self.rotation // 90


# ---------------------------------------------------------------------
# Training / adaptation state
# ---------------------------------------------------------------------


@dataclass
class LossValue:
    """A scalar loss tensor plus named sub-loss values (floats, for reporting)."""

    value: torch.Tensor
    components: dict[str, float] = field(default_factory=dict)

    def item(self) -> float:
        return float(self.value.detach().item())


@dataclass
class OptimizerState:
    """Adam optimizer plus the bookkeeping of the saturation-triggered LR schedule."""

    optimizer: torch.optim.Optimizer
    learning_rate: float
    step: int = 0
    best_loss: float | None = None
    stale_count: int = 0

    def set_learning_rate(self, lr: float) -> None:
        self.learning_rate = lr
        for group in self.optimizer.param_groups:
            group["lr"] = lr


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    main_loss: list[float] = field(default_factory=list)
    aux_loss: list[float] = field(default_factory=list)
    learning_rates: list[float] = field(default_factory=list)
    lr_drop_epochs: list[int] = field(default_factory=list)
    opt_state: OptimizerState | None = None

    @property
    def epochs(self) -> int:
        return len(self.train_loss)


class TraceRow(NamedTuple):
    loop: int
    frame: int
    step: int
    loss: float


@dataclass
class TTTTrace:
    """Per-(loop, frame, step) test-time losses and encoder digests at loop boundaries.

    `encoder_digests[0]` is the digest before the first loop; entry k is the
    digest after loop k.
    """

    rows: list[TraceRow] = field(default_factory=list)
    encoder_digests: list[str] = field(default_factory=list)
    learning_rates: list[float] = field(default_factory=list)
    opt_state: OptimizerState | None = None

    def loop_mean(self, loop: int) -> float:
        values = [r.loss for r in self.rows if r.loop == loop]
        return float(np.mean(values)) if values else math.nan


# ---------------------------------------------------------------------
# Data
# ---------------------------------------------------------------------


@dataclass
class VideoSequence:
    """A synthetic VFSS-like video.

    frames: (T, H, W) float32 in [0, 1]
    masks: (T, 12, H, W) uint8 in {0, 1}, channel c holds label code c + 1
    label_map: (T, H, W) uint8 codes 0..12
    """

    video_id: str
    frames: npt.NDArray[np.float32]
    masks: npt.NDArray[np.uint8]
    label_map: npt.NDArray[np.uint8]
    metadata: dict[str, Any] = field(default_factory=dict)

    @property
    def n_frames(self) -> int:
        return int(self.frames.shape[0])

    @property
    def height(self) -> int:
        return int(self.frames.shape[1])

    @property
    def width(self) -> int:
        return int(self.frames.shape[2])

    @property
    def present(self) -> npt.NDArray[np.bool_]:
        """(T, 12) flags: anatomy has at least one foreground pixel in the frame."""
        return self.masks.reshape(self.n_frames, NUM_ANATOMIES, -1).any(axis=2)

    def anatomy_mask(self, frame: int, code: int) -> GroundTruthMask:
        return self.masks[frame, code - 1]


@dataclass
class VideoEntry:
    video_id: str
    n_frames: int
    split: str
    path: str
    seed: int
    present: list[list[int]] = field(default_factory=list)


@dataclass
class DatasetManifest:
    videos: list[VideoEntry]
    split_seed: int
    format_version: int

    def ids(self, split: str | None = None) -> list[str]:
        return [v.video_id for v in self.videos if split is None or v.split == split]


# ---------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------


@dataclass(frozen=True)
class MetricsRecord:
    """Per-instance metrics. Distances are in pixels; NaN marks an undefined value."""

    video_id: str
    frame_index: int
    anatomy_label: int
    dsc: float
    hd95: float
    asd: float
    sensitivity: float

    @property
    def undefined(self) -> bool:
        return math.isnan(self.hd95) or math.isnan(self.asd)
