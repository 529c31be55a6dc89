"""
prompt_ttt: prompt-guided test-time training for promptable segmentation.

This module exposes the main library entry points: model construction,
source training, video adaptation and evaluation.
"""

from .core import (
    baseline_ttt_video,
    evaluate_dataset,
    fit,
    forward_aux,
    forward_main,
    infer_after_ttt,
    init_params,
    ttt_video,
)

__version__ = "0.1.0"

__all__ = [
    "baseline_ttt_video",
    "evaluate_dataset",
    "fit",
    "forward_aux",
    "forward_main",
    "infer_after_ttt",
    "init_params",
    "ttt_video",
]
