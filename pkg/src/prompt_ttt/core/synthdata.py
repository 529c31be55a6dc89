"""
Synthetic VFSS-like videos with analytic anatomy masks.

Every video shows a static vertebral column (C1-C7 as rounded rectangles),
a mandible wedge, a tilted trachea band, a curved pharynx channel, an
epiglottis flap oscillating by a small angle, and a bolus ellipse that
deforms while travelling down the pharynx channel.

Masks are computed analytically from the shape parameters. The label map
is derived from the per-anatomy masks by LABEL_PRECEDENCE, so at overlaps
it shows the highest-precedence code while both masks keep the pixel.

On-disk layout:

    <root>/manifest.json
    <root>/<video_id>/metadata.json
    <root>/<video_id>/frame_000.pgm          8-bit intensities
    <root>/<video_id>/label_000.pgm          codes 0..12
    <root>/<video_id>/mask_000_01.pgm        0 / 255, one file per label code

Functions:
    generate_video(): One seeded synthetic video.
    generate_dataset(): All videos for a SynthConfig.
    flatten_labels(): Per-anatomy masks -> label maps.
    apply_domain_shift(): Photometric source -> target shift.
    split_dataset(): Seeded 8:2 video split.
    save_dataset() / load_dataset(): Portable PGM + JSON persistence.
    quantize_frames(): 8-bit view of a video, as it comes back from disk.
    directory_digest(): Content hash of a dataset directory.
"""

# ---------------------------------------------------------------------
# Imports
# ---------------------------------------------------------------------

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Any

import numpy as np
import numpy.typing as npt
from PIL import Image, UnidentifiedImageError
from scipy.ndimage import gaussian_filter

from prompt_ttt.constants import (
    ANATOMY_CODES,
    ANATOMY_NAMES,
    BACKGROUND_CODE,
    DATASET_FORMAT_VERSION,
    DEFAULT_ENCODING,
    LABEL_PRECEDENCE,
    MANIFEST_FILE_NAME,
    NUM_ANATOMIES,
    SPLIT_TRAIN_RATIO,
    VIDEO_METADATA_FILE_NAME,
)
from prompt_ttt.exceptions import ConfigurationError, DatasetFormatError, ValidationError
from prompt_ttt.types import (
    DatasetManifest,
    ShiftSpec,
    SynthConfig,
    VideoEntry,
    VideoSequence,
)
from prompt_ttt.utils.logger_setup import get_logger
from prompt_ttt.utils.seeding import derive_seed, make_rng

__all__ = [
    "apply_domain_shift",
    "directory_digest",
    "flatten_labels",
    "generate_dataset",
    "generate_video",
    "load_dataset",
    "quantize_frames",
    "save_dataset",
    "split_dataset",
]

logger = get_logger()

# ---------------------------------------------------------------------
# Message Constants
# ---------------------------------------------------------------------

MSG_SPLIT_TOO_SMALL = "Cannot split {n} video(s) into non-empty train and test sets."
MSG_MISSING_FILE = "Missing dataset file: {path}"
MSG_CORRUPT_FILE = "Corrupt dataset file: {path} ({reason})"
MSG_DANGLING_PATH = "Manifest entry {video_id!r} points to a missing directory: {path}"
MSG_VERSION = "Unsupported dataset format_version {found} in {path} (expected {expected})."
MSG_LABEL_RANGE = "Label map {path} contains value {value} outside 0..12."
MSG_MASK_VALUES = "Mask file {path} must contain only 0 and 255."

# Base intensities; barium bolus bright, air-filled channels dark.
_INTENSITY: dict[str, float] = {
    "bolus": 0.92,
    "pharynx": 0.16,
    "trachea": 0.10,
    "epiglottis": 0.52,
    "mandible": 0.72,
    **{f"C{i}": 0.78 for i in range(1, 8)},
}
_BACKGROUND_LEVEL = 0.35

# ---------------------------------------------------------------------
# Scene geometry
# ---------------------------------------------------------------------


@dataclass(frozen=True)
class _Scene:
    """Per-video shape parameters in normalized [0, 1] image coordinates."""

    spine_x: float
    spine_top: float
    vertebra_height: float
    vertebra_width: float
    vertebra_gap: float
    mandible: tuple[tuple[float, float], ...]
    trachea_x: float
    trachea_tilt: float
    trachea_width: float
    pharynx_x: float
    pharynx_bend: float
    pharynx_width: float
    epiglottis_y: float
    epiglottis_angle: float
    bolus_axes: tuple[float, float]
    bolus_travel: float
    intensity_jitter: dict[str, float]

    def pharynx_center(self, y: npt.NDArray[np.float64] | float) -> Any:
        return self.pharynx_x + self.pharynx_bend * np.sin(math.pi * (np.asarray(y) - 0.2) / 0.65)


def _sample_scene(rng: np.random.Generator, config: SynthConfig) -> _Scene:
    def jitter(scale: float) -> float:
        return float(rng.uniform(-scale, scale))

    travel_cap = config.max_bolus_step * 0.9 * max(config.n_frames - 1, 1)
    return _Scene(
        spine_x=0.76 + jitter(0.02),
        spine_top=0.16 + jitter(0.02),
        vertebra_height=0.075 + jitter(0.005),
        vertebra_width=0.13 + jitter(0.01),
        vertebra_gap=0.028 + jitter(0.004),
        mandible=(
            (0.06 + jitter(0.02), 0.22 + jitter(0.02)),
            (0.44 + jitter(0.02), 0.34 + jitter(0.02)),
            (0.10 + jitter(0.02), 0.46 + jitter(0.02)),
        ),
        trachea_x=0.50 + jitter(0.02),
        trachea_tilt=0.08 + jitter(0.03),
        trachea_width=0.07 + jitter(0.01),
        pharynx_x=0.50 + jitter(0.02),
        pharynx_bend=0.05 + jitter(0.015),
        pharynx_width=0.11 + jitter(0.01),
        epiglottis_y=0.46 + jitter(0.02),
        epiglottis_angle=0.5 + jitter(0.1),
        bolus_axes=(0.055 + jitter(0.005), 0.04 + jitter(0.005)),
        bolus_travel=min(0.6, travel_cap),
        intensity_jitter={name: jitter(0.04) for name in ANATOMY_CODES},
    )


def _rounded_rect(
    xx: npt.NDArray[np.float64],
    yy: npt.NDArray[np.float64],
    center: tuple[float, float],
    half: tuple[float, float],
    radius: float,
) -> npt.NDArray[np.bool_]:
    inner_x = np.maximum(np.abs(xx - center[0]) - (half[0] - radius), 0.0)
    inner_y = np.maximum(np.abs(yy - center[1]) - (half[1] - radius), 0.0)
    return inner_x**2 + inner_y**2 <= radius**2


def _ellipse(
    xx: npt.NDArray[np.float64],
    yy: npt.NDArray[np.float64],
    center: tuple[float, float],
    axes: tuple[float, float],
    angle: float,
) -> npt.NDArray[np.bool_]:
    dx, dy = xx - center[0], yy - center[1]
    cos_a, sin_a = math.cos(angle), math.sin(angle)
    u = dx * cos_a + dy * sin_a
    v = -dx * sin_a + dy * cos_a
    return (u / axes[0]) ** 2 + (v / axes[1]) ** 2 <= 1.0


def _triangle(
    xx: npt.NDArray[np.float64],
    yy: npt.NDArray[np.float64],
    vertices: tuple[tuple[float, float], ...],
) -> npt.NDArray[np.bool_]:
    def side(p: tuple[float, float], q: tuple[float, float]) -> npt.NDArray[np.float64]:
        return (q[0] - p[0]) * (yy - p[1]) - (q[1] - p[1]) * (xx - p[0])

    a, b, c = vertices
    s1, s2, s3 = side(a, b), side(b, c), side(c, a)
    return ((s1 >= 0) & (s2 >= 0) & (s3 >= 0)) | ((s1 <= 0) & (s2 <= 0) & (s3 <= 0))


def _frame_masks(
    scene: _Scene,
    xx: npt.NDArray[np.float64],
    yy: npt.NDArray[np.float64],
    phase: float,
) -> dict[str, npt.NDArray[np.bool_]]:
    masks: dict[str, npt.NDArray[np.bool_]] = {}

    step = scene.vertebra_height + scene.vertebra_gap
    for i in range(7):
        center = (scene.spine_x - 0.01 * i, scene.spine_top + scene.vertebra_height / 2 + i * step)
        half = (scene.vertebra_width / 2, scene.vertebra_height / 2)
        masks[f"C{i + 1}"] = _rounded_rect(xx, yy, center, half, radius=0.35 * half[1])

    masks["mandible"] = _triangle(xx, yy, scene.mandible)

    trachea_axis = scene.trachea_x + scene.trachea_tilt * (yy - 0.62)
    masks["trachea"] = (np.abs(xx - trachea_axis) <= scene.trachea_width / 2) & (yy >= 0.62)

    pharynx_axis = scene.pharynx_center(yy)
    masks["pharynx"] = (
        (np.abs(xx - pharynx_axis) <= scene.pharynx_width / 2) & (yy >= 0.2) & (yy <= 0.85)
    )

    flap_angle = scene.epiglottis_angle + 0.25 * math.sin(2.0 * math.pi * phase)
    flap_center = (float(scene.pharynx_center(scene.epiglottis_y)) + 0.03, scene.epiglottis_y)
    masks["epiglottis"] = _ellipse(xx, yy, flap_center, (0.065, 0.028), flap_angle)

    bolus_y = 0.25 + scene.bolus_travel * phase
    squeeze = 1.0 + 0.25 * math.sin(math.pi * phase)
    axes = (scene.bolus_axes[0] / squeeze, scene.bolus_axes[1] * squeeze)
    bolus_center = (float(scene.pharynx_center(bolus_y)), bolus_y)
    masks["bolus"] = _ellipse(xx, yy, bolus_center, axes, math.pi / 2)
    return masks


def _background(rng: np.random.Generator, config: SynthConfig) -> npt.NDArray[np.float64]:
    height, width = config.height, config.width
    yy, xx = np.meshgrid(
        (np.arange(height) + 0.5) / height, (np.arange(width) + 0.5) / width, indexing="ij"
    )
    field = np.full((height, width), _BACKGROUND_LEVEL)
    for _ in range(3):
        fx, fy = rng.uniform(0.5, 2.0, size=2)
        phase = rng.uniform(0, 2 * math.pi)
        field += 0.04 * np.sin(2 * math.pi * (fx * xx + fy * yy) + phase)
    texture = gaussian_filter(rng.standard_normal((height, width)), sigma=max(height, width) / 32)
    texture /= max(float(np.abs(texture).max()), 1e-12)
    return field + config.texture_amplitude * texture


# ---------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------


def flatten_labels(masks: npt.NDArray[np.uint8]) -> npt.NDArray[np.uint8]:
    """(T, 12, H, W) per-anatomy masks -> (T, H, W) label map by LABEL_PRECEDENCE."""
    labels = np.full(masks.shape[:1] + masks.shape[2:], BACKGROUND_CODE, dtype=np.uint8)
    for code in reversed(LABEL_PRECEDENCE):
        labels[masks[:, code - 1].astype(bool)] = code
    return labels


def generate_video(seed: int, config: SynthConfig, video_id: str | None = None) -> VideoSequence:
    """
    Render one deterministic synthetic video.

    Raises:
        ConfigurationError: If T < 1 or the resolution is not divisible by the downsample factor.
    """
    config.validate()
    rng = make_rng(seed)
    scene = _sample_scene(rng, config)
    height, width, n_frames = config.height, config.width, config.n_frames
    yy, xx = np.meshgrid(
        (np.arange(height) + 0.5) / height, (np.arange(width) + 0.5) / width, indexing="ij"
    )
    background = _background(rng, config)

    frames = np.empty((n_frames, height, width), dtype=np.float32)
    masks = np.zeros((n_frames, NUM_ANATOMIES, height, width), dtype=np.uint8)
    for t in range(n_frames):
        phase = t / (n_frames - 1) if n_frames > 1 else 0.0
        shapes = _frame_masks(scene, xx, yy, phase)
        canvas = background.copy()
        # Paint lowest precedence first so overlaps show the higher code's intensity.
        for code in reversed(LABEL_PRECEDENCE):
            name = ANATOMY_NAMES[code]
            mask = shapes[name]
            masks[t, code - 1] = mask
            canvas[mask] = _INTENSITY[name] + scene.intensity_jitter[name]
        if config.blur_sigma > 0:
            canvas = gaussian_filter(canvas, sigma=config.blur_sigma)
        frames[t] = np.clip(canvas, 0.0, 1.0)

    video = VideoSequence(
        video_id=video_id or f"video_{seed:08x}",
        frames=frames,
        masks=masks,
        label_map=flatten_labels(masks),
        metadata={"seed": seed, "generator": asdict(config), "shift": None},
    )
    logger.debug(
        f"Generated {video.video_id}: {n_frames} frames at {width}x{height}, "
        f"bolus travel {scene.bolus_travel:.3f}"
    )
    return video


def generate_dataset(config: SynthConfig) -> list[VideoSequence]:
    """`config.n_videos` videos with ids video_000, video_001, ... and derived seeds."""
    return [
        generate_video(derive_seed(config.seed, index), config, video_id=f"video_{index:03d}")
        for index in range(config.n_videos)
    ]


def apply_domain_shift(video: VideoSequence, spec: ShiftSpec) -> VideoSequence:
    """
    contrast * v ** gamma + brightness + N(0, noise_sigma), clamped to [0, 1].

    Masks and label maps are copied unchanged.
    """
    frames = video.frames.astype(np.float64)
    shifted = spec.contrast * np.power(frames, spec.gamma) + spec.brightness
    if spec.noise_sigma > 0:
        noise_rng = np.random.default_rng(spec.seed)
        shifted = shifted + noise_rng.normal(0.0, spec.noise_sigma, size=frames.shape)
    return replace(
        video,
        frames=np.clip(shifted, 0.0, 1.0).astype(np.float32),
        masks=video.masks.copy(),
        label_map=video.label_map.copy(),
        metadata={**video.metadata, "shift": asdict(spec)},
    )


def quantize_frames(video: VideoSequence) -> VideoSequence:
    """The video with frames rounded to 8 bits, as `load_dataset` returns them."""
    frames_u8 = np.round(video.frames * 255.0).astype(np.uint8)
    return replace(video, frames=(frames_u8.astype(np.float32) / 255.0))


# ---------------------------------------------------------------------
# Split
# ---------------------------------------------------------------------


def _present_codes(video: VideoSequence) -> list[list[int]]:
    present = video.present
    return [[int(c) + 1 for c in np.flatnonzero(row)] for row in present]


def split_dataset(videos: list[VideoSequence], seed: int) -> DatasetManifest:
    """
    Seeded shuffle, then whole videos go to train (80%) or test.

    n_train = min(ceil(0.8 n), n - 1); fewer than two videos cannot be split.

    Raises:
        ConfigurationError: If n < 2.
    """
    n = len(videos)
    n_train = min(math.ceil(SPLIT_TRAIN_RATIO * n), n - 1)
    if n_train < 1 or n - n_train < 1:
        raise ConfigurationError(MSG_SPLIT_TOO_SMALL.format(n=n))
    order = make_rng(seed).permutation(n)
    train_positions = set(order[:n_train].tolist())
    entries = [
        VideoEntry(
            video_id=video.video_id,
            n_frames=video.n_frames,
            split="train" if index in train_positions else "test",
            path=video.video_id,
            seed=int(video.metadata.get("seed", 0)),
            present=_present_codes(video),
        )
        for index, video in enumerate(videos)
    ]
    return DatasetManifest(videos=entries, split_seed=seed, format_version=DATASET_FORMAT_VERSION)


# ---------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------


def _write_pgm(path: Path, array: npt.NDArray[np.uint8]) -> None:
    Image.fromarray(np.ascontiguousarray(array, dtype=np.uint8)).save(path, format="PPM")


def _read_pgm(path: Path) -> npt.NDArray[np.uint8]:
    if not path.is_file():
        raise DatasetFormatError(MSG_MISSING_FILE.format(path=path))
    try:
        with Image.open(path) as image:
            if image.mode != "L":
                raise DatasetFormatError(
                    MSG_CORRUPT_FILE.format(path=path, reason=f"mode {image.mode}, expected L")
                )
            return np.array(image, dtype=np.uint8)
    except (UnidentifiedImageError, OSError) as exc:
        raise DatasetFormatError(MSG_CORRUPT_FILE.format(path=path, reason=exc)) from exc


def _read_json(path: Path) -> dict[str, Any]:
    if not path.is_file():
        raise DatasetFormatError(MSG_MISSING_FILE.format(path=path))
    try:
        data = json.loads(path.read_text(encoding=DEFAULT_ENCODING))
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(MSG_CORRUPT_FILE.format(path=path, reason=exc)) from exc
    if not isinstance(data, dict):
        raise DatasetFormatError(MSG_CORRUPT_FILE.format(path=path, reason="not a JSON object"))
    return data


def _write_json(path: Path, data: dict[str, Any]) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding=DEFAULT_ENCODING)


def save_dataset(
    videos: list[VideoSequence], manifest: DatasetManifest, directory: Path | str
) -> None:
    """Write the manifest and one directory per video (frames quantized to 8 bits)."""
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    by_id = {video.video_id: video for video in videos}
    for entry in manifest.videos:
        video = by_id[entry.video_id]
        video_dir = root / entry.path
        video_dir.mkdir(parents=True, exist_ok=True)
        frames_u8 = np.round(video.frames * 255.0).astype(np.uint8)
        for t in range(video.n_frames):
            _write_pgm(video_dir / f"frame_{t:03d}.pgm", frames_u8[t])
            _write_pgm(video_dir / f"label_{t:03d}.pgm", video.label_map[t])
            for code in range(1, NUM_ANATOMIES + 1):
                mask_path = video_dir / f"mask_{t:03d}_{code:02d}.pgm"
                _write_pgm(mask_path, video.masks[t, code - 1] * 255)
        _write_json(
            video_dir / VIDEO_METADATA_FILE_NAME,
            {
                "format_version": DATASET_FORMAT_VERSION,
                "video_id": video.video_id,
                "n_frames": video.n_frames,
                "height": video.height,
                "width": video.width,
                **video.metadata,
            },
        )
    _write_json(
        root / MANIFEST_FILE_NAME,
        {
            "format_version": manifest.format_version,
            "split_seed": manifest.split_seed,
            "videos": [asdict(entry) for entry in manifest.videos],
        },
    )
    logger.info(f"Saved {len(manifest.videos)} video(s) to {root}")


def _check_version(data: dict[str, Any], path: Path) -> None:
    found = data.get("format_version")
    if found != DATASET_FORMAT_VERSION:
        raise DatasetFormatError(
            MSG_VERSION.format(found=found, path=path, expected=DATASET_FORMAT_VERSION)
        )


def _load_video(root: Path, entry: VideoEntry) -> VideoSequence:
    video_dir = root / entry.path
    if not video_dir.is_dir():
        raise DatasetFormatError(MSG_DANGLING_PATH.format(video_id=entry.video_id, path=video_dir))
    meta_path = video_dir / VIDEO_METADATA_FILE_NAME
    meta = _read_json(meta_path)
    _check_version(meta, meta_path)

    frames, labels, masks = [], [], []
    for t in range(entry.n_frames):
        frames.append(_read_pgm(video_dir / f"frame_{t:03d}.pgm"))
        label_path = video_dir / f"label_{t:03d}.pgm"
        label = _read_pgm(label_path)
        if int(label.max(initial=0)) > NUM_ANATOMIES:
            raise ValidationError(MSG_LABEL_RANGE.format(path=label_path, value=int(label.max())))
        labels.append(label)
        per_code = []
        for code in range(1, NUM_ANATOMIES + 1):
            mask_path = video_dir / f"mask_{t:03d}_{code:02d}.pgm"
            mask = _read_pgm(mask_path)
            if not np.isin(mask, (0, 255)).all():
                raise ValidationError(MSG_MASK_VALUES.format(path=mask_path))
            per_code.append((mask // 255).astype(np.uint8))
        masks.append(np.stack(per_code))

    metadata = {
        key: value
        for key, value in meta.items()
        if key not in {"format_version", "video_id", "n_frames", "height", "width"}
    }
    return VideoSequence(
        video_id=entry.video_id,
        frames=np.stack(frames).astype(np.float32) / 255.0,
        masks=np.stack(masks),
        label_map=np.stack(labels),
        metadata=metadata,
    )


def load_dataset(directory: Path | str) -> tuple[list[VideoSequence], DatasetManifest]:
    """
    Read a dataset written by `save_dataset`.

    Raises:
        DatasetFormatError: Missing or corrupt files, dangling paths, version mismatch.
        ValidationError: Label values above 12 or mask values other than 0/255.
    """
    root = Path(directory)
    manifest_path = root / MANIFEST_FILE_NAME
    data = _read_json(manifest_path)
    _check_version(data, manifest_path)
    try:
        entries = [VideoEntry(**entry) for entry in data["videos"]]
        manifest = DatasetManifest(
            videos=entries,
            split_seed=int(data["split_seed"]),
            format_version=data["format_version"],
        )
    except (KeyError, TypeError) as exc:
        raise DatasetFormatError(MSG_CORRUPT_FILE.format(path=manifest_path, reason=exc)) from exc
    videos = [_load_video(root, entry) for entry in manifest.videos]
    logger.info(f"Loaded {len(videos)} video(s) from {root}")
    return videos, manifest


def directory_digest(directory: Path | str) -> str:
    """SHA-256 over relative paths and bytes of every file below `directory`."""
    root = Path(directory)
    digest = hashlib.sha256()
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        digest.update(path.relative_to(root).as_posix().encode())
        digest.update(path.read_bytes())
    return digest.hexdigest()
