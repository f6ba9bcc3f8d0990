"""Photorealistic style transfer with automatic semantic grouping."""

from .kernels import BACKEND as KERNEL_BACKEND
from .losses import LossConfig, LossReport, Precomputed, ToyScorer, total_loss
from .optimize import RunJob, adam_step, init_transfer_image, run
from .semantics import Taxonomy, group_semantics, word_similarity

__version__ = "0.1.0"

__all__ = [
    "KERNEL_BACKEND",
    "LossConfig",
    "LossReport",
    "Precomputed",
    "RunJob",
    "Taxonomy",
    "ToyScorer",
    "__version__",
    "adam_step",
    "group_semantics",
    "init_transfer_image",
    "run",
    "total_loss",
    "word_similarity",
]
