"""Input validation helpers, in the spirit of ``sklearn.utils.validation``."""

import numpy as np

from .exceptions import InvalidInputError


def check_frame(frame, *, name="frame"):
    """Validate an image and return it as a float64 ``(H, W, C)`` array.

    A 2-D array is promoted to a single-channel frame. Values must be finite
    and lie in ``[0, 1]``; ``C`` must be 1 or 3.
    """
    arr = np.asarray(frame, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3:
        raise InvalidInputError(f"{name} must be HxWxC, got shape {arr.shape}")
    h, w, c = arr.shape
    if h < 1 or w < 1:
        raise InvalidInputError(f"{name} must be non-empty, got shape {arr.shape}")
    if c not in (1, 3):
        raise InvalidInputError(f"{name} must have 1 or 3 channels, got {c}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite values")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise InvalidInputError(f"{name} values must lie in [0, 1]")
    return arr


def check_mask(mask, *, name="mask"):
    """Validate a binary mask and return it as a ``uint8`` ``(H, W)`` array."""
    arr = np.asarray(mask)
    if arr.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.dtype == bool:
        return arr.astype(np.uint8)
    if not np.all(np.isin(arr, (0, 1))):
        raise InvalidInputError(f"{name} values must be exactly 0 or 1")
    return arr.astype(np.uint8)


def check_logits(logits, *, name="logits"):
    """Validate a finite 2-D score map and return it as float64."""
    arr = np.asarray(logits, dtype=np.float64)
    if arr.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite values")
    return arr


def check_same_shape(a, b, names=("a", "b")):
    sa, sb = np.shape(a), np.shape(b)
    if sa != sb:
        raise InvalidInputError(f"shape mismatch: {names[0]} {sa} vs {names[1]} {sb}")
