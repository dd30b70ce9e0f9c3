"""Projected signed-gradient attacks on mask-predicting trackers."""

import warnings
from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np
import torch
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .exceptions import AttackError, GradientError, InvalidInputError
from .losses import ATTACK_LOSS_KINDS, LossBreakdown, LossConfig, attack_objective
from .validation import check_frame, check_mask, check_same_shape

ATTACK_KINDS = ATTACK_LOSS_KINDS + ("none",)
STEP_SIGNS = ("ascend", "descend")


@dataclass(frozen=True)
class AttackConfig:
    epsilon: float = 8 / 255
    alpha: float = 2 / 255
    iters: int = 10
    step_sign: str = "ascend"
    loss_cfg: LossConfig = field(default_factory=LossConfig)
    attack_kind: str = "trackpgd"
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise InvalidInputError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if not self.alpha > 0:
            raise InvalidInputError(f"alpha must be > 0, got {self.alpha}")
        if int(self.iters) != self.iters or self.iters < 0:
            raise InvalidInputError(f"iters must be a non-negative integer, got {self.iters}")
        if self.step_sign not in STEP_SIGNS:
            raise InvalidInputError(f"step_sign must be one of {STEP_SIGNS}")
        if self.attack_kind not in ATTACK_KINDS:
            raise InvalidInputError(f"attack_kind must be one of {ATTACK_KINDS}")
        if self.alpha > self.epsilon > 0:
            warnings.warn("step size alpha exceeds epsilon", stacklevel=3)
        # the lambda schedule runs over the attack's own iteration count
        if self.loss_cfg.total_iters != max(int(self.iters), 1):
            object.__setattr__(self, "loss_cfg",
                               replace(self.loss_cfg, total_iters=max(int(self.iters), 1)))


@dataclass
class AttackResult:
    adv_frame: np.ndarray
    per_iter_losses: List[LossBreakdown]
    linf_norm: float
    iterations_run: int


@dataclass
class SequenceStep:
    """Outcome of one tracked frame in :func:`attack_sequence`."""

    index: int
    pred_mask: np.ndarray
    ground_truth_used: np.ndarray
    result: AttackResult


def clip_eps(candidate, original, epsilon):
    """Project ``candidate`` onto the l-inf ball around ``original`` intersected with [0, 1]."""
    candidate = np.asarray(candidate, dtype=np.float64)
    original = np.asarray(original, dtype=np.float64)
    check_same_shape(candidate, original, ("candidate", "original"))
    out = np.clip(candidate, original - epsilon, original + epsilon)
    return np.clip(out, 0.0, 1.0)


def _pgd(tracker, state, frame, prev_mask, cfg: AttackConfig):
    frame = check_frame(frame)
    gt = check_mask(prev_mask, name="prev_mask")
    if gt.shape != frame.shape[:2]:
        raise InvalidInputError(
            f"prev_mask shape {gt.shape} does not match frame {frame.shape[:2]}")
    if cfg.attack_kind == "none" or cfg.iters == 0:
        return AttackResult(frame.copy(), [], 0.0, 0)

    region = tracker.perturbable_region(state, frame)
    region = None if region is None else np.asarray(region, dtype=np.float64)[..., None]
    gt_t = torch.as_tensor(gt, dtype=torch.float64)
    direction = 1.0 if cfg.step_sign == "ascend" else -1.0

    adv = frame.copy()
    losses = []
    for t in range(1, cfg.iters + 1):
        def evaluator(logits, t=t):
            total, breakdown = attack_objective(cfg.attack_kind, logits, gt_t, cfg.loss_cfg, t)
            losses.append(breakdown)
            return total

        try:
            grad = tracker.input_gradient(state, adv, evaluator)
        except (GradientError, InvalidInputError):
            raise
        except Exception as exc:
            raise AttackError(f"tracker forward/backward failed at iteration {t}: {exc}") from exc
        grad = np.asarray(grad, dtype=np.float64)
        if not np.all(np.isfinite(grad)):
            raise GradientError(f"non-finite input gradient at iteration {t}")
        step = cfg.alpha * np.sign(grad)
        if region is not None:
            step = step * region
        adv = clip_eps(adv + direction * step, frame, cfg.epsilon)

    return AttackResult(adv, losses, float(np.max(np.abs(adv - frame))), cfg.iters)


def trackpgd_attack(tracker, state, frame, prev_mask, cfg: AttackConfig = None) -> AttackResult:
    """Run the difference-loss attack on one frame.

    ``prev_mask`` is the tracker's own previous binary prediction and serves as
    the ground truth for every iteration.
    """
    cfg = AttackConfig() if cfg is None else cfg
    if cfg.attack_kind != "trackpgd":
        cfg = replace(cfg, attack_kind="trackpgd")
    return _pgd(tracker, state, frame, prev_mask, cfg)


def baseline_attack(tracker, state, frame, prev_mask, cfg: AttackConfig) -> AttackResult:
    """Same loop as :func:`trackpgd_attack` with the loss selected by ``cfg.attack_kind``."""
    return _pgd(tracker, state, frame, prev_mask, cfg)


def attack_sequence(tracker, frames, mask0, cfg: AttackConfig) -> List[SequenceStep]:
    """Track a sequence while attacking every frame after the first.

    The ground truth for frame ``i`` is the prediction the (attacked) pipeline
    made on frame ``i - 1``; for frame 1 it is ``mask0``.
    """
    if mask0 is None:
        raise InvalidInputError("an initial mask is required")
    frames = list(frames)
    if len(frames) < 2:
        raise InvalidInputError("a sequence needs at least 2 frames")
    state = tracker.init(frames[0], mask0)
    prev = check_mask(mask0, name="mask0")
    steps = []
    for i in range(1, len(frames)):
        result = _pgd(tracker, state, frames[i], prev, cfg)
        pred = (np.asarray(tracker.predict_logits(state, result.adv_frame)) > 0).astype(np.uint8)
        steps.append(SequenceStep(i, pred, prev, result))
        prev = pred
    return steps


def clean_track(tracker, frames, mask0):
    """Predictions of the tracker alone, one per frame after the first."""
    frames = list(frames)
    state = tracker.init(frames[0], mask0)
    return [(np.asarray(tracker.predict_logits(state, f)) > 0).astype(np.uint8) for f in frames[1:]]


class TrackPGD(BaseEstimator):
    """sklearn-style wrapper around the attack loop.

    ``fit(tracker)`` binds the victim; ``transform(frames, mask0)`` returns the
    sequence with every frame after the first replaced by its adversarial
    version. Hyperparameters are regular estimator params, so ``clone`` and
    ``set_params`` drive sweeps.
    """

    def __init__(self, epsilon=8 / 255, alpha=2 / 255, iters=10, step_sign="ascend",
                 lambda1=1.0, lambda2=1.0, gamma=2.0, alpha_t=0.25, dice_smooth=1.0,
                 attack_kind="trackpgd", seed=0):
        self.epsilon = epsilon
        self.alpha = alpha
        self.iters = iters
        self.step_sign = step_sign
        self.lambda1 = lambda1
        self.lambda2 = lambda2
        self.gamma = gamma
        self.alpha_t = alpha_t
        self.dice_smooth = dice_smooth
        self.attack_kind = attack_kind
        self.seed = seed

    def config(self) -> AttackConfig:
        loss_cfg = LossConfig(lambda1=self.lambda1, lambda2=self.lambda2, gamma=self.gamma,
                              alpha_t=self.alpha_t, total_iters=max(int(self.iters), 1),
                              dice_smooth=self.dice_smooth)
        return AttackConfig(epsilon=self.epsilon, alpha=self.alpha, iters=self.iters,
                            step_sign=self.step_sign, loss_cfg=loss_cfg,
                            attack_kind=self.attack_kind, seed=self.seed)

    def fit(self, tracker, y=None):
        missing = {"predicts_logits", "provides_input_gradient"} - set(tracker.capabilities)
        if missing:
            raise InvalidInputError(f"tracker lacks capabilities: {sorted(missing)}")
        self.config_ = self.config()
        self.tracker_ = tracker
        return self

    def perturb(self, state, frame, prev_mask) -> AttackResult:
        check_is_fitted(self, "tracker_")
        return _pgd(self.tracker_, state, frame, prev_mask, self.config_)

    def attack_sequence(self, frames, mask0) -> List[SequenceStep]:
        check_is_fitted(self, "tracker_")
        return attack_sequence(self.tracker_, frames, mask0, self.config_)

    def transform(self, frames, mask0):
        steps = self.attack_sequence(frames, mask0)
        out = [np.asarray(frames[0], dtype=np.float64)]
        out.extend(s.result.adv_frame for s in steps)
        return np.stack(out)

    def fit_transform(self, tracker, frames, mask0):
        return self.fit(tracker).transform(frames, mask0)
