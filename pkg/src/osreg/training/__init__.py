"""Losses, optimization loop, schedules, and checkpointing."""

from .loop import SampleDataset, TrainConfig, TrainResult, train, validate_aepe
from .losses import LossConfig, geometric_loss, masked_mean_l1, sequence_loss, total_loss

__all__ = [
    "LossConfig",
    "TrainConfig",
    "TrainResult",
    "SampleDataset",
    "train",
    "validate_aepe",
    "sequence_loss",
    "geometric_loss",
    "total_loss",
    "masked_mean_l1",
]
