"""Pixel-level mask primitives.

Frames are ``(H, W, C)`` float arrays in ``[0, 1]``, binary masks are
``(H, W)`` arrays of 0/1, logit maps are finite ``(H, W)`` float arrays.
"""

from typing import NamedTuple, Optional

import numpy as np
from scipy import ndimage

from .exceptions import InvalidInputError
from .validation import check_logits, check_mask, check_same_shape

_EIGHT = np.ones((3, 3), dtype=bool)


class BoundingBox(NamedTuple):
    row_min: int
    col_min: int
    height: int
    width: int

    @property
    def area(self):
        return self.height * self.width


def sigmoid(logits):
    """Numerically stable elementwise logistic function."""
    x = np.asarray(logits, dtype=np.float64)
    return np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                    np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))


def binarize(logits, threshold=0.0):
    """Threshold a logit map; scores strictly above ``threshold`` are object."""
    scores = check_logits(logits)
    return (scores > threshold).astype(np.uint8)


def split_pixels(pred, gt):
    """Return boolean ``(correct, wrong)`` maps partitioning the pixel grid."""
    pred = check_mask(pred, name="pred")
    gt = check_mask(gt, name="gt")
    check_same_shape(pred, gt, ("pred", "gt"))
    correct = pred == gt
    return correct, ~correct


def mask_iou(a, b):
    """Intersection over union of two binary masks (1.0 when both are empty)."""
    a = check_mask(a, name="a").astype(bool)
    b = check_mask(b, name="b").astype(bool)
    check_same_shape(a, b)
    union = np.count_nonzero(a | b)
    if union == 0:
        return 1.0
    return np.count_nonzero(a & b) / union


def bbox_from_mask(mask) -> Optional[BoundingBox]:
    """Smallest axis-aligned box covering every object pixel, or None."""
    mask = check_mask(mask)
    rows = np.flatnonzero(mask.any(axis=1))
    if rows.size == 0:
        return None
    cols = np.flatnonzero(mask.any(axis=0))
    r0, r1 = int(rows[0]), int(rows[-1])
    c0, c1 = int(cols[0]), int(cols[-1])
    return BoundingBox(r0, c0, r1 - r0 + 1, c1 - c0 + 1)


def box_iou(a: Optional[BoundingBox], b: Optional[BoundingBox]):
    """IoU of two boxes; a missing box overlaps nothing. Two missing boxes give None."""
    if a is None and b is None:
        return None
    if a is None or b is None:
        return 0.0
    r0 = max(a.row_min, b.row_min)
    c0 = max(a.col_min, b.col_min)
    r1 = min(a.row_min + a.height, b.row_min + b.height)
    c1 = min(a.col_min + a.width, b.col_min + b.width)
    inter = max(0, r1 - r0) * max(0, c1 - c0)
    return inter / (a.area + b.area - inter)


def boundary(mask, radius=0):
    """Object pixels touching background (8-neighbourhood), dilated by ``radius``.

    Pixels outside the frame count as background, so a full mask yields the
    frame-border ring.
    """
    if radius < 0:
        raise InvalidInputError(f"radius must be >= 0, got {radius}")
    mask = check_mask(mask).astype(bool)
    interior = ndimage.binary_erosion(mask, structure=_EIGHT, border_value=0)
    edge = mask & ~interior
    if radius > 0 and edge.any():
        edge = ndimage.binary_dilation(edge, structure=_EIGHT, iterations=int(radius))
    return edge.astype(np.uint8)


def mask_to_image(mask):
    """Encode a binary mask as 8-bit gray (0 background, 255 object)."""
    return check_mask(mask) * np.uint8(255)


def image_to_mask(img):
    """Decode an 8-bit gray mask; any value >= 128 is object."""
    arr = np.asarray(img)
    if arr.ndim == 3:
        arr = arr[..., 0]
    return (arr >= 128).astype(np.uint8)
