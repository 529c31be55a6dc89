"""Deterministic seed derivation.

Every loop, frame, step and sample gets its own seed derived from the run
seed and its position, so reruns and partial reruns see the same streams.
"""

from __future__ import annotations

import numpy as np
import torch

__all__ = ["derive_seed", "make_rng", "seed_everything"]


def derive_seed(*keys: int) -> int:
    """Map an integer key path to a 32-bit seed via numpy SeedSequence."""
    entropy = [int(k) & 0xFFFFFFFF for k in keys]
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])


def make_rng(*keys: int) -> np.random.Generator:
    """Return a numpy Generator seeded from `derive_seed(*keys)`."""
    return np.random.default_rng(derive_seed(*keys))


def seed_everything(seed: int) -> None:
    """Seed the global torch/numpy generators and pin torch to deterministic kernels."""
    np.random.seed(derive_seed(seed))  # noqa: NPY002
    torch.manual_seed(seed)
    torch.use_deterministic_algorithms(True, warn_only=True)
