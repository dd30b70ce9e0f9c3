"""Mask-based projected-gradient attacks on object trackers."""

from .attack import (AttackConfig, AttackResult, TrackPGD, attack_sequence, baseline_attack,
                     clean_track, clip_eps, trackpgd_attack)
from .exceptions import (AttackError, ConfigError, GradientError, IngestionError,
                         InvalidInputError, TrackPGDError, TrainingError)
from .losses import (LossBreakdown, LossConfig, delta_loss, dice_loss, focal_delta_loss,
                     lambda_schedule, segpgd_loss, trackpgd_loss)
from .masks import BoundingBox, bbox_from_mask, binarize, boundary, mask_iou, split_pixels
from .toy import ToyTracker, generate_toy_sequences

__version__ = "0.1.0"

__all__ = [
    "AttackConfig", "AttackResult", "TrackPGD", "attack_sequence", "baseline_attack",
    "clean_track", "clip_eps", "trackpgd_attack", "AttackError", "ConfigError", "GradientError",
    "IngestionError", "InvalidInputError", "TrackPGDError", "TrainingError", "LossBreakdown",
    "LossConfig", "delta_loss", "dice_loss", "focal_delta_loss", "lambda_schedule", "segpgd_loss",
    "trackpgd_loss", "BoundingBox", "bbox_from_mask", "binarize", "boundary", "mask_iou",
    "split_pixels", "ToyTracker", "generate_toy_sequences",
]
