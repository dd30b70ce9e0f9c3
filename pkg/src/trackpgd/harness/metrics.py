"""Per-frame and per-sequence tracking metrics."""

from typing import List, Optional, Sequence

import numpy as np

from ..exceptions import InvalidInputError
from ..masks import bbox_from_mask, boundary, box_iou, mask_iou
from ..validation import check_mask, check_same_shape

DEFAULT_REINIT_GAP = 5


def jaccard(pred, gt):
    """Region similarity J: IoU of predicted and annotated masks."""
    return mask_iou(pred, gt)


def contour_f(pred, gt, tol=1):
    """Boundary F-measure with Chebyshev matching tolerance ``tol`` pixels.

    A predicted boundary pixel counts towards precision when a ground-truth
    boundary pixel lies within ``tol``; recall is the symmetric quantity.
    """
    if tol < 0:
        raise InvalidInputError("tol must be >= 0")
    pred = check_mask(pred, name="pred")
    gt = check_mask(gt, name="gt")
    check_same_shape(pred, gt, ("pred", "gt"))
    pb = boundary(pred).astype(bool)
    gb = boundary(gt).astype(bool)
    n_p, n_g = pb.sum(), gb.sum()
    if n_p == 0 and n_g == 0:
        return 1.0
    if n_p == 0 or n_g == 0:
        return 0.0
    precision = np.count_nonzero(pb & boundary(gt, tol).astype(bool)) / n_p
    recall = np.count_nonzero(gb & boundary(pred, tol).astype(bool)) / n_g
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def bbox_overlap(pred, gt) -> Optional[float]:
    """IoU of the boxes around each mask; None when the annotation is empty."""
    gt_box = bbox_from_mask(gt)
    if gt_box is None:
        return None
    return box_iou(bbox_from_mask(pred), gt_box)


def failure_frames(overlaps: Sequence[Optional[float]], reinit_gap=DEFAULT_REINIT_GAP) -> List[int]:
    """Indices counted as failures under the reset protocol.

    A frame with zero overlap is a failure; the tracker is re-initialised
    ``reinit_gap`` frames later and that frame is not evaluated, so checking
    resumes at ``failure + reinit_gap + 1``. ``None`` (no annotation) is never
    a failure.
    """
    if reinit_gap < 0:
        raise InvalidInputError("reinit_gap must be >= 0")
    out = []
    i, n = 0, len(overlaps)
    while i < n:
        if overlaps[i] is not None and overlaps[i] == 0:
            out.append(i)
            i += reinit_gap + 1
        else:
            i += 1
    return out


def reset_robustness(overlaps: Sequence[Optional[float]], reinit_gap=DEFAULT_REINIT_GAP):
    """Return ``(failures, failures / len(overlaps))``. Higher means less robust."""
    if len(overlaps) == 0:
        raise InvalidInputError("no records to evaluate")
    failures = len(failure_frames(overlaps, reinit_gap))
    return failures, failures / len(overlaps)


def unsupervised_overlap(preds, gts):
    """Mean per-frame mask IoU of a single-initialisation run."""
    preds, gts = list(preds), list(gts)
    if not gts or any(g is None for g in gts):
        raise InvalidInputError("unsupervised overlap needs a ground-truth mask for every frame")
    if len(preds) != len(gts):
        raise InvalidInputError("prediction and ground-truth counts differ")
    return float(np.mean([mask_iou(p, g) for p, g in zip(preds, gts)]))
