"""
Promptable segmentation network at desk scale.

The network has a shared image encoder, a prompt encoder for points and
boxes, and two mask decoders with identical architecture:

- `dseg`: main decoder, conditioned on box prompts.
- `daux`: auxiliary decoder, conditioned on point prompts.

`rot_head` (4-way rotation classifier) and `recon_head` (pixel
reconstruction) serve the rotation and masked-reconstruction TTT baselines.

The batched methods of `PromptSegModel` take (B, 1, H, W) images and are
used by the trainer and the TTT engine. The module-level functions are the
per-instance API over (H, W) images.

Functions:
    init_params(): Build a seeded model for an architecture.
    validate_image(): Check shape, finiteness and range of an image.
    encode_image(): Encoder features for one image.
    encode_prompt(): Prompt tokens for one point or box.
    forward_main(): Box-prompted mask probabilities.
    forward_aux(): Point-prompted mask probabilities.
    param_digest(): Content hash of one component's parameters.
"""

# ---------------------------------------------------------------------
# Imports
# ---------------------------------------------------------------------

from __future__ import annotations

import hashlib
import math
from collections.abc import Sequence

import torch
import torch.nn.functional as F  # noqa: N812
from torch import nn

from prompt_ttt.constants import VALID_COMPONENTS
from prompt_ttt.exceptions import ShapeError, ValidationError
from prompt_ttt.types import (
    ArchConfig,
    BoxPrompt,
    FeatureMap,
    ImageTensor,
    MaskProb,
    PointPrompt,
    PromptEmbedding,
)

__all__ = [
    "ModelParams",
    "PromptSegModel",
    "box_coords",
    "encode_image",
    "encode_prompt",
    "forward_aux",
    "forward_main",
    "init_params",
    "param_digest",
    "point_coords",
    "validate_image",
]

# ---------------------------------------------------------------------
# Message Constants
# ---------------------------------------------------------------------

MSG_IMAGE_NDIM = "Expected a (H, W) image, got shape {shape}."
MSG_IMAGE_DIVISIBLE = "Image size {height}x{width} is not divisible by downsample factor {s}."
MSG_IMAGE_NONFINITE = "Image contains non-finite values."
MSG_IMAGE_RANGE = "Image values must lie in [0, 1], got [{lo:.4g}, {hi:.4g}]."
MSG_UNKNOWN_COMPONENT = "Unknown component {name!r}; expected one of {valid}."
MSG_NO_POINTS = "At least one point prompt is required."

# ---------------------------------------------------------------------
# Building blocks
# ---------------------------------------------------------------------


class ConvEncoder(nn.Module):
    """Strided conv stages (each halves resolution) followed by a 1x1 projection to d."""

    def __init__(self, arch: ArchConfig) -> None:
        super().__init__()
        layers: list[nn.Module] = []
        in_ch = 1
        for out_ch in arch.stage_channels:
            layers += [nn.Conv2d(in_ch, out_ch, kernel_size=3, stride=2, padding=1), nn.GELU()]
            in_ch = out_ch
        self.stages = nn.Sequential(*layers)
        self.proj = nn.Conv2d(in_ch, arch.embed_dim, kernel_size=1)

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        return self.proj(self.stages(images))


class PromptEncoder(nn.Module):
    """
    Fixed sinusoidal encoding of normalized coordinates plus learned type tokens.

    A coordinate pair (u, v) in [0, 1] maps to
    [sin(f_k u), cos(f_k u), sin(f_k v), cos(f_k v)] for d / 4 frequencies
    f_k = pi * 2 ** (k * octaves / (d / 4 - 1)). The lowest frequency is pi,
    so the encoding is injective on [0, 1).
    """

    def __init__(self, arch: ArchConfig) -> None:
        super().__init__()
        n_freq = arch.embed_dim // 4
        steps = torch.arange(n_freq, dtype=torch.float32)
        exponents = steps * (arch.pe_octaves / max(n_freq - 1, 1))
        self.register_buffer("frequencies", math.pi * torch.pow(2.0, exponents))
        self.point_embed = nn.Parameter(torch.randn(1, arch.embed_dim) * 0.1)
        self.corner_embed = nn.Parameter(torch.randn(2, arch.embed_dim) * 0.1)

    def positional(self, coords: torch.Tensor) -> torch.Tensor:
        """(..., 2) normalized (u, v) -> (..., d) encoding."""
        freqs = self.frequencies.to(coords.dtype)
        angles_u = coords[..., :1] * freqs
        angles_v = coords[..., 1:2] * freqs
        return torch.cat(
            [angles_u.sin(), angles_u.cos(), angles_v.sin(), angles_v.cos()], dim=-1
        )

    def points(self, coords: torch.Tensor) -> torch.Tensor:
        """(B, N, 2) normalized point centers -> (B, N, d) tokens."""
        return self.positional(coords) + self.point_embed

    def boxes(self, corners: torch.Tensor) -> torch.Tensor:
        """(B, 4) normalized (u_min, v_min, u_max, v_max) -> (B, 2, d) corner tokens."""
        pairs = corners.reshape(-1, 2, 2)
        return self.positional(pairs) + self.corner_embed

    def dense(self, grid_h: int, grid_w: int, dtype: torch.dtype) -> torch.Tensor:
        """(grid_h * grid_w, d) encoding of feature cell centers, row-major."""
        ys = (torch.arange(grid_h, dtype=dtype) + 0.5) / grid_h
        xs = (torch.arange(grid_w, dtype=dtype) + 0.5) / grid_w
        grid_y, grid_x = torch.meshgrid(ys, xs, indexing="ij")
        coords = torch.stack([grid_x.reshape(-1), grid_y.reshape(-1)], dim=-1)
        return self.positional(coords)


class MaskDecoder(nn.Module):
    """
    Prompt-conditioned mask decoder.

    Every feature cell (plus its positional encoding) attends to the prompt
    tokens with sigmoid-gated dot products; the result is upsampled by two
    transposed convolutions and bilinearly resized to the image.
    """

    def __init__(self, arch: ArchConfig) -> None:
        super().__init__()
        d = arch.embed_dim
        c1, c2 = arch.decoder_channels
        self.query = nn.Linear(d, d)
        self.key = nn.Linear(d, d)
        self.value = nn.Linear(d, d)
        self.up1 = nn.ConvTranspose2d(d, c1, kernel_size=2, stride=2)
        self.up2 = nn.ConvTranspose2d(c1, c2, kernel_size=2, stride=2)
        self.head = nn.Conv2d(c2, 1, kernel_size=1)
        nn.init.normal_(self.head.weight, std=0.02 * arch.init_scale)
        nn.init.zeros_(self.head.bias)

    def forward(
        self,
        features: torch.Tensor,
        dense_pe: torch.Tensor,
        tokens: torch.Tensor,
        out_size: tuple[int, int],
    ) -> torch.Tensor:
        batch, d, grid_h, grid_w = features.shape
        cells = features.flatten(2).transpose(1, 2) + dense_pe
        scores = self.query(cells) @ self.key(tokens).transpose(1, 2) / math.sqrt(d)
        cells = cells + torch.sigmoid(scores) @ self.value(tokens)
        x = cells.transpose(1, 2).reshape(batch, d, grid_h, grid_w)
        x = F.gelu(self.up1(x))
        x = F.gelu(self.up2(x))
        logits = self.head(x)
        return F.interpolate(logits, size=out_size, mode="bilinear", align_corners=False)


class RotationHead(nn.Module):
    def __init__(self, arch: ArchConfig) -> None:
        super().__init__()
        self.fc = nn.Linear(arch.embed_dim, 4)
        # Near-uniform logits at init: untrained cross-entropy ~ ln 4.
        nn.init.normal_(self.fc.weight, std=0.01)
        nn.init.zeros_(self.fc.bias)

    def forward(self, features: torch.Tensor) -> torch.Tensor:
        return self.fc(features.mean(dim=(2, 3)))


class ReconstructionHead(nn.Module):
    """Per-cell linear map to an s x s pixel patch, rearranged by pixel shuffle."""

    def __init__(self, arch: ArchConfig) -> None:
        super().__init__()
        self.downsample = arch.downsample
        self.proj = nn.Conv2d(arch.embed_dim, arch.downsample**2, kernel_size=1)

    def forward(self, features: torch.Tensor) -> torch.Tensor:
        return torch.sigmoid(F.pixel_shuffle(self.proj(features), self.downsample))


# ---------------------------------------------------------------------
# Model
# ---------------------------------------------------------------------


class PromptSegModel(nn.Module):
    """All named parameter collections of the network plus its architecture."""

    def __init__(self, arch: ArchConfig) -> None:
        super().__init__()
        arch.validate()
        self.arch = arch
        self.encoder = ConvEncoder(arch)
        self.prompt_encoder = PromptEncoder(arch)
        self.dseg = MaskDecoder(arch)
        self.daux = MaskDecoder(arch)
        self.rot_head = RotationHead(arch)
        self.recon_head = ReconstructionHead(arch)

    def component(self, name: str) -> nn.Module:
        if name not in VALID_COMPONENTS:
            raise ValidationError(MSG_UNKNOWN_COMPONENT.format(name=name, valid=VALID_COMPONENTS))
        module: nn.Module = getattr(self, name)
        return module

    def encode(self, images: torch.Tensor) -> torch.Tensor:
        """(B, 1, H, W) -> (B, d, H / s, W / s)."""
        return self.encoder(images)

    def main_logits_from_features(
        self, features: torch.Tensor, boxes: torch.Tensor, out_size: tuple[int, int]
    ) -> torch.Tensor:
        tokens = self.prompt_encoder.boxes(boxes)
        dense_pe = self.prompt_encoder.dense(*features.shape[-2:], dtype=features.dtype)
        return self.dseg(features, dense_pe, tokens, out_size)

    def aux_logits_from_features(
        self, features: torch.Tensor, points: torch.Tensor, out_size: tuple[int, int]
    ) -> torch.Tensor:
        tokens = self.prompt_encoder.points(points)
        dense_pe = self.prompt_encoder.dense(*features.shape[-2:], dtype=features.dtype)
        return self.daux(features, dense_pe, tokens, out_size)

    def main_logits(self, images: torch.Tensor, boxes: torch.Tensor) -> torch.Tensor:
        """Box-prompted logits (B, 1, H, W); boxes are (B, 4) normalized corners."""
        return self.main_logits_from_features(self.encode(images), boxes, images.shape[-2:])

    def aux_logits(self, images: torch.Tensor, points: torch.Tensor) -> torch.Tensor:
        """Point-prompted logits (B, 1, H, W); points are (B, N, 2) normalized centers."""
        return self.aux_logits_from_features(self.encode(images), points, images.shape[-2:])

    def rotation_logits(self, images: torch.Tensor) -> torch.Tensor:
        return self.rot_head(self.encode(images))

    def reconstruct(self, images: torch.Tensor) -> torch.Tensor:
        return self.recon_head(self.encode(images))


ModelParams = PromptSegModel

# ---------------------------------------------------------------------
# Prompt coordinate helpers
# ---------------------------------------------------------------------


def point_coords(
    points: Sequence[PointPrompt], height: int, width: int, dtype: torch.dtype = torch.float32
) -> torch.Tensor:
    """(N, 2) normalized pixel-center coordinates of the given points."""
    return torch.tensor(
        [[(p.x + 0.5) / width, (p.y + 0.5) / height] for p in points], dtype=dtype
    )


def box_coords(
    box: BoxPrompt, height: int, width: int, dtype: torch.dtype = torch.float32
) -> torch.Tensor:
    """(4,) normalized box corners."""
    return torch.tensor(
        [box.x_min / width, box.y_min / height, box.x_max / width, box.y_max / height],
        dtype=dtype,
    )


# ---------------------------------------------------------------------
# Per-instance API
# ---------------------------------------------------------------------


def init_params(seed: int, arch_config: ArchConfig | None = None) -> ModelParams:
    """
    Build a model with deterministic parameters for (seed, arch_config).

    The global torch generator is left untouched.

    Raises:
        ConfigurationError: If the architecture is inconsistent.
    """
    arch = arch_config or ArchConfig()
    arch.validate()
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        return PromptSegModel(arch)


def validate_image(image: ImageTensor, downsample: int) -> None:
    """
    Raises:
        ShapeError: If the image is not 2-D or not divisible by `downsample`.
        ValidationError: If the image has non-finite values or leaves [0, 1].
    """
    if image.ndim != 2:  # noqa: PLR2004
        raise ShapeError(MSG_IMAGE_NDIM.format(shape=tuple(image.shape)))
    height, width = image.shape
    if height == 0 or width == 0 or height % downsample or width % downsample:
        raise ShapeError(MSG_IMAGE_DIVISIBLE.format(height=height, width=width, s=downsample))
    if not bool(torch.isfinite(image).all()):
        raise ValidationError(MSG_IMAGE_NONFINITE)
    lo, hi = float(image.min()), float(image.max())
    if lo < 0.0 or hi > 1.0:
        raise ValidationError(MSG_IMAGE_RANGE.format(lo=lo, hi=hi))


def _as_batch(image: ImageTensor, params: ModelParams) -> torch.Tensor:
    validate_image(image, params.arch.downsample)
    dtype = next(params.parameters()).dtype
    return image.to(dtype)[None, None]


def encode_image(image: ImageTensor, params: ModelParams) -> FeatureMap:
    """(H, W) image -> (d, H / s, W / s) features."""
    return params.encode(_as_batch(image, params))[0]


def encode_prompt(
    prompt: PointPrompt | BoxPrompt, params: ModelParams, image_size: tuple[int, int]
) -> PromptEmbedding:
    """
    Encode one prompt for an image of `image_size` = (height, width).

    Raises:
        ValidationError: If the prompt lies outside the image.
    """
    height, width = image_size
    prompt.validate(height, width)
    dtype = next(params.parameters()).dtype
    if isinstance(prompt, BoxPrompt):
        tokens = params.prompt_encoder.boxes(box_coords(prompt, height, width, dtype)[None])
        return PromptEmbedding(tokens=tokens[0], kind="box")
    coords = point_coords([prompt], height, width, dtype)[None]
    return PromptEmbedding(tokens=params.prompt_encoder.points(coords)[0], kind="point")


def forward_main(image: ImageTensor, box: BoxPrompt, params: ModelParams) -> MaskProb:
    """Mask probabilities (H, W) from the box-prompted decoder."""
    batch = _as_batch(image, params)
    height, width = image.shape
    box.validate(height, width)
    boxes = box_coords(box, height, width, batch.dtype)[None]
    return torch.sigmoid(params.main_logits(batch, boxes))[0, 0]


def forward_aux(
    image: ImageTensor, point: PointPrompt | Sequence[PointPrompt], params: ModelParams
) -> MaskProb:
    """Mask probabilities (H, W) from the point-prompted decoder (one or more points)."""
    batch = _as_batch(image, params)
    height, width = image.shape
    points = [point] if isinstance(point, PointPrompt) else list(point)
    if not points:
        raise ValidationError(MSG_NO_POINTS)
    for p in points:
        p.validate(height, width)
    coords = point_coords(points, height, width, batch.dtype)[None]
    return torch.sigmoid(params.aux_logits(batch, coords))[0, 0]


def param_digest(params: ModelParams, component: str) -> str:
    """
    SHA-256 over the component's parameter names, shapes, dtypes and raw bytes.

    Raises:
        ValidationError: If `component` is not a known component name.
    """
    module = params.component(component)
    digest = hashlib.sha256()
    for name, tensor in sorted(module.state_dict().items()):
        data = tensor.detach().cpu().contiguous()
        digest.update(f"{name}:{tuple(data.shape)}:{data.dtype}".encode())
        digest.update(data.numpy().tobytes())
    return digest.hexdigest()
