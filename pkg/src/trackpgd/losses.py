"""Attack objectives on binary mask logits.

Every function accepts torch tensors (kept on the autograd graph) or array
likes (converted to float64 tensors). Scalars are returned as 0-d tensors so
the attack loop can differentiate through them; :class:`LossBreakdown`
carries the detached float values for logging.
"""

from dataclasses import asdict, dataclass

import torch
import torch.nn.functional as F

from .exceptions import InvalidInputError

ATTACK_LOSS_KINDS = ("trackpgd", "segpgd_obj", "segpgd_bg", "bce_pgd")


@dataclass(frozen=True)
class LossConfig:
    lambda1: float = 1.0
    lambda2: float = 1.0
    gamma: float = 2.0
    alpha_t: float = 0.25
    total_iters: int = 10
    dice_smooth: float = 1.0

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise InvalidInputError("lambda1 and lambda2 must be >= 0")
        if self.gamma < 0:
            raise InvalidInputError("gamma must be >= 0")
        if not 0 < self.alpha_t <= 1:
            raise InvalidInputError("alpha_t must lie in (0, 1]")
        if int(self.total_iters) != self.total_iters or self.total_iters < 1:
            raise InvalidInputError("total_iters must be a positive integer")
        if not self.dice_smooth > 0:
            raise InvalidInputError("dice_smooth must be > 0")


@dataclass(frozen=True)
class LossBreakdown:
    """Detached loss components of one attack iteration.

    For the trackpgd and SegPGD variants ``total == lambda1 * focal + lambda2 * dice``
    and ``delta`` holds the scalar of the term wrapped by the focal factor. For
    the plain BCE control, ``total`` and ``delta`` hold the BCE and the other
    terms are zero.
    """

    total: float
    focal: float
    dice: float
    delta: float
    segpgd_pos_term: float
    segpgd_neg_term: float

    def to_dict(self):
        return asdict(self)


def _as_pair(logits, gt):
    z = logits if torch.is_tensor(logits) else torch.as_tensor(logits, dtype=torch.float64)
    if z.ndim != 2:
        raise InvalidInputError(f"logits must be 2-D, got shape {tuple(z.shape)}")
    g = gt if torch.is_tensor(gt) else torch.as_tensor(gt)
    if tuple(g.shape) != tuple(z.shape):
        raise InvalidInputError(
            f"shape mismatch: logits {tuple(z.shape)} vs gt {tuple(g.shape)}")
    return z, g.to(dtype=z.dtype)


def _check_lam(lam):
    if not 0.0 <= lam <= 1.0:
        raise InvalidInputError(f"lam must lie in [0, 1], got {lam}")


def lambda_schedule(t, T):
    """Weight on wrongly classified pixels at iteration ``t`` of ``T``: ``(t-1)/(2T)``."""
    if T < 1 or not 1 <= t <= T:
        raise InvalidInputError(f"need 1 <= t <= T, got t={t}, T={T}")
    return (t - 1) / (2 * T)


def _segpgd_parts(z, g, lam):
    # a logit of exactly 0 is predicted background
    pred = (z > 0).to(z.dtype)
    correct = (pred == g).to(z.dtype)
    bce = F.binary_cross_entropy_with_logits(z, g, reduction="none")
    hw = z.numel()
    pos = (1.0 - lam) * correct * bce
    neg = lam * (1.0 - correct) * bce
    return pos + neg, pos.sum() / hw, neg.sum() / hw


def segpgd_loss(logits, gt, lam):
    """Binary SegPGD loss: BCE reweighted ``1-lam`` on correct and ``lam`` on wrong pixels.

    Returns ``(scalar, per_pixel)``; the scalar is the per-pixel sum over ``H*W``.
    """
    _check_lam(lam)
    z, g = _as_pair(logits, gt)
    per_pixel, _, _ = _segpgd_parts(z, g, lam)
    return per_pixel.sum() / z.numel(), per_pixel


def delta_loss(logits, gt, lam):
    """SegPGD loss towards ``gt`` minus SegPGD loss towards ``1 - gt``."""
    _check_lam(lam)
    z, g = _as_pair(logits, gt)
    to_gt, map_gt = segpgd_loss(z, g, lam)
    to_bg, map_bg = segpgd_loss(z, 1.0 - g, lam)
    return to_gt - to_bg, map_gt - map_bg


def focal_weight(logits, gt, gamma, alpha_t):
    """Per-pixel focal modulation ``alpha_t * (1 - p_t) ** gamma``."""
    z, g = _as_pair(logits, gt)
    p = torch.sigmoid(z)
    p_t = g * p + (1.0 - g) * (1.0 - p)
    return alpha_t * torch.pow(1.0 - p_t, gamma)


def focal_delta_loss(logits, gt, cfg: LossConfig, lam):
    """Spatial mean of the focal weight applied pixelwise to the difference-loss map."""
    _, per_pixel = delta_loss(logits, gt, lam)
    return (focal_weight(logits, gt, cfg.gamma, cfg.alpha_t) * per_pixel).mean()


def dice_loss(probs, gt, smooth=1.0):
    """Soft dice loss ``1 - (2 sum(p*g) + s) / (sum(p) + sum(g) + s)``."""
    if not smooth > 0:
        raise InvalidInputError("smooth must be > 0")
    p, g = _as_pair(probs, gt)
    inter = (p * g).sum()
    return 1.0 - (2.0 * inter + smooth) / (p.sum() + g.sum() + smooth)


def attack_objective(kind, logits, gt, cfg: LossConfig, t):
    """Differentiable objective of one attack iteration.

    ``kind`` selects the term wrapped by the focal factor: the difference loss
    (``trackpgd``), the SegPGD loss towards the mask (``segpgd_obj``) or the
    negated SegPGD loss towards the complement (``segpgd_bg``). ``bce_pgd`` is
    plain mean BCE with no focal or dice term.

    Returns ``(total_tensor, LossBreakdown)``.
    """
    if kind not in ATTACK_LOSS_KINDS:
        raise InvalidInputError(f"unknown loss kind {kind!r}")
    z, g = _as_pair(logits, gt)
    lam = lambda_schedule(t, cfg.total_iters)
    hw = z.numel()

    if kind == "bce_pgd":
        total = F.binary_cross_entropy_with_logits(z, g)
        v = float(total.detach())
        return total, LossBreakdown(v, 0.0, 0.0, v, 0.0, 0.0)

    map_gt, pos, neg = _segpgd_parts(z, g, lam)
    if kind == "trackpgd":
        map_bg, _, _ = _segpgd_parts(z, 1.0 - g, lam)
        term_map = map_gt - map_bg
        term = map_gt.sum() / hw - map_bg.sum() / hw
    elif kind == "segpgd_obj":
        term_map = map_gt
        term = map_gt.sum() / hw
    else:
        map_bg, _, _ = _segpgd_parts(z, 1.0 - g, lam)
        term_map = -map_bg
        term = -(map_bg.sum() / hw)

    focal = (focal_weight(z, g, cfg.gamma, cfg.alpha_t) * term_map).mean()
    dice = dice_loss(torch.sigmoid(z), g, cfg.dice_smooth)
    total = cfg.lambda1 * focal + cfg.lambda2 * dice
    breakdown = LossBreakdown(
        total=float(total.detach()),
        focal=float(focal.detach()),
        dice=float(dice.detach()),
        delta=float(term.detach()),
        segpgd_pos_term=float(pos.detach()),
        segpgd_neg_term=float(neg.detach()),
    )
    return total, breakdown


def trackpgd_loss(logits, gt, cfg: LossConfig, t) -> LossBreakdown:
    """Composite ``lambda1 * focal + lambda2 * dice`` at iteration ``t``."""
    return attack_objective("trackpgd", logits, gt, cfg, t)[1]
