"""
Segmentation evaluation: DSC, HD95, ASD and sensitivity.

Conventions:
- A pixel is foreground when its probability is >= the threshold.
- Boundary pixels are the mask minus its 4-connectivity erosion; pixels on
  the image edge count as boundary.
- Distances are Euclidean, in pixels. HD95 is the linearly interpolated
  95th percentile of the pooled distances in both directions; ASD is their mean.
- DSC of two empty masks is 1.0. Distance metrics with an empty operand and
  sensitivity with an empty ground truth are NaN (undefined).
"""

# ---------------------------------------------------------------------
# Imports
# ---------------------------------------------------------------------

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import asdict, dataclass

import numpy as np
import numpy.typing as npt
import pandas as pd
import torch
from scipy.ndimage import binary_erosion, distance_transform_edt, generate_binary_structure

from prompt_ttt.constants import (
    ANATOMY_NAMES,
    DEFAULT_THRESHOLD,
    HD_PERCENTILE,
    METRIC_COLUMNS,
)
from prompt_ttt.exceptions import ConfigurationError, ShapeError
from prompt_ttt.types import GroundTruthMask, MaskProb, MetricsRecord, VideoSequence

__all__ = [
    "EvaluationResult",
    "InstanceKey",
    "asd",
    "binarize",
    "dsc",
    "evaluate_dataset",
    "hd95",
    "sensitivity",
    "surface_distances",
]

MSG_SHAPE_MISMATCH = "Mask shapes differ: {left} vs {right}."
MSG_NO_PREDICTIONS = "No predictions to evaluate."
MSG_UNKNOWN_VIDEO = "Prediction refers to unknown video {video_id!r}."

InstanceKey = tuple[str, int, int]
"""(video_id, frame_index, anatomy_label)."""

_FOUR_CONNECTED = generate_binary_structure(2, 1)

# ---------------------------------------------------------------------
# Pixel-level metrics
# ---------------------------------------------------------------------


def binarize(
    prob: MaskProb | npt.NDArray[np.floating], threshold: float = DEFAULT_THRESHOLD
) -> GroundTruthMask:
    """1 where prob >= threshold, else 0."""
    values = prob.detach().cpu().numpy() if isinstance(prob, torch.Tensor) else np.asarray(prob)
    return (values >= threshold).astype(np.uint8)


BoolPair = tuple[npt.NDArray[np.bool_], npt.NDArray[np.bool_]]


def _check_pair(a: npt.NDArray[np.generic], b: npt.NDArray[np.generic]) -> BoolPair:
    if a.shape != b.shape:
        raise ShapeError(MSG_SHAPE_MISMATCH.format(left=a.shape, right=b.shape))
    return np.asarray(a).astype(bool), np.asarray(b).astype(bool)


def dsc(pred: GroundTruthMask, gt: GroundTruthMask) -> float:
    p, g = _check_pair(pred, gt)
    total = int(p.sum()) + int(g.sum())
    if total == 0:
        return 1.0
    return 2.0 * int((p & g).sum()) / total


def sensitivity(pred: GroundTruthMask, gt: GroundTruthMask) -> float:
    p, g = _check_pair(pred, gt)
    n_gt = int(g.sum())
    if n_gt == 0:
        return math.nan
    return int((p & g).sum()) / n_gt


def _boundary(mask: npt.NDArray[np.bool_]) -> npt.NDArray[np.bool_]:
    eroded = binary_erosion(mask, structure=_FOUR_CONNECTED, border_value=0)
    return mask & ~eroded


def surface_distances(
    a: GroundTruthMask, b: GroundTruthMask
) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]] | None:
    """
    Sorted distances from each boundary pixel of `a` to the boundary of `b`, and back.

    Returns:
        (a_to_b, b_to_a), or None when either mask is empty.
    """
    mask_a, mask_b = _check_pair(a, b)
    if not mask_a.any() or not mask_b.any():
        return None
    edge_a, edge_b = _boundary(mask_a), _boundary(mask_b)
    dist_to_b = distance_transform_edt(~edge_b)
    dist_to_a = distance_transform_edt(~edge_a)
    return np.sort(dist_to_b[edge_a]), np.sort(dist_to_a[edge_b])


def _pooled(a: GroundTruthMask, b: GroundTruthMask) -> npt.NDArray[np.float64] | None:
    distances = surface_distances(a, b)
    if distances is None:
        return None
    return np.concatenate(distances)


def hd95(a: GroundTruthMask, b: GroundTruthMask) -> float:
    pooled = _pooled(a, b)
    if pooled is None:
        return math.nan
    return float(np.percentile(pooled, HD_PERCENTILE, method="linear"))


def asd(a: GroundTruthMask, b: GroundTruthMask) -> float:
    pooled = _pooled(a, b)
    if pooled is None:
        return math.nan
    return float(pooled.mean())


# ---------------------------------------------------------------------
# Dataset evaluation
# ---------------------------------------------------------------------


@dataclass
class EvaluationResult:
    """
    Per-instance records plus aggregates.

    `per_anatomy` has one row per anatomy (catalog order) and an "Average"
    row holding the mean of the anatomy rows. NaN values are skipped by the
    means and counted in `n_undefined`.
    """

    records: list[MetricsRecord]
    per_anatomy: pd.DataFrame
    overall: dict[str, float]
    n_undefined: int

    def records_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame([asdict(r) for r in self.records])
        frame.insert(3, "anatomy", frame["anatomy_label"].map(ANATOMY_NAMES))
        return frame.rename(columns={"frame_index": "frame"})


def evaluate_dataset(
    predictions: Mapping[InstanceKey, MaskProb | GroundTruthMask],
    dataset: Sequence[VideoSequence],
    threshold: float = DEFAULT_THRESHOLD,
) -> EvaluationResult:
    """
    Score every predicted instance against its ground-truth anatomy mask.

    Float predictions are binarized at `threshold`; uint8/bool masks are used as is.
    Records are ordered by video (dataset order), frame and anatomy label.

    Raises:
        ConfigurationError: If there are no predictions or a video is unknown.
    """
    if not predictions:
        raise ConfigurationError(MSG_NO_PREDICTIONS)
    videos = {video.video_id: (index, video) for index, video in enumerate(dataset)}
    for video_id, _, _ in predictions:
        if video_id not in videos:
            raise ConfigurationError(MSG_UNKNOWN_VIDEO.format(video_id=video_id))

    def order(key: InstanceKey) -> tuple[int, int, int]:
        return videos[key[0]][0], key[1], key[2]

    records: list[MetricsRecord] = []
    for key in sorted(predictions, key=order):
        video_id, frame, label = key
        gt = videos[video_id][1].anatomy_mask(frame, label)
        raw = predictions[key]
        if isinstance(raw, torch.Tensor) or np.issubdtype(np.asarray(raw).dtype, np.floating):
            pred = binarize(raw, threshold)
        else:
            pred = np.asarray(raw).astype(np.uint8)
        records.append(
            MetricsRecord(
                video_id=video_id,
                frame_index=frame,
                anatomy_label=label,
                dsc=dsc(pred, gt),
                hd95=hd95(pred, gt),
                asd=asd(pred, gt),
                sensitivity=sensitivity(pred, gt),
            )
        )

    table = pd.DataFrame([asdict(r) for r in records])
    grouped = table.groupby("anatomy_label")[list(METRIC_COLUMNS)].mean()
    per_anatomy = grouped.reindex(sorted(ANATOMY_NAMES))
    counts = table.groupby("anatomy_label").size()
    per_anatomy["n"] = counts.reindex(per_anatomy.index, fill_value=0)
    per_anatomy.index = [ANATOMY_NAMES[code] for code in per_anatomy.index]
    overall = {column: float(per_anatomy[column].mean()) for column in METRIC_COLUMNS}
    per_anatomy.loc["Average"] = [*overall.values(), int(per_anatomy["n"].sum())]
    per_anatomy.index.name = "anatomy"

    n_undefined = sum(r.undefined for r in records)
    return EvaluationResult(
        records=records, per_anatomy=per_anatomy, overall=overall, n_undefined=n_undefined
    )
