"""
Core API for prompt_ttt.

Exports:
    - init_params, forward_main, forward_aux: Promptable segmentation model.
    - fit: Source-domain training.
    - ttt_video, baseline_ttt_video, infer_after_ttt: Test-time adaptation.
    - evaluate_dataset: Per-anatomy segmentation metrics.
"""

from .metrics import evaluate_dataset
from .model import forward_aux, forward_main, init_params
from .trainer import fit
from .ttt_engine import baseline_ttt_video, infer_after_ttt, ttt_video

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
