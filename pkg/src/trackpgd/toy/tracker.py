"""A small template-conditioned mask predictor used as the attack victim.

Architecture: two shallow convolutional encoders (template and search), a
prototype correlation layer (foreground and background prototypes pooled
from the template frame, multiplied channelwise into the search features)
and a small mask head ending in a 1x1 convolution. Output resolution equals
input resolution.
"""

import io
import json
import struct
from dataclasses import dataclass
from typing import Optional, Protocol

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ..exceptions import GradientError, InvalidInputError, TrainingError
from ..masks import BoundingBox, bbox_from_mask
from ..validation import check_frame, check_mask

WEIGHTS_MAGIC = b"TPGDTOY\0"
WEIGHTS_VERSION = 1


class TrackerAdapter(Protocol):
    """What the attack engine needs from a mask-predicting tracker.

    ``capabilities`` is a set drawn from ``{"predicts_logits",
    "provides_input_gradient", "perturbable_region"}``. ``forward`` must be
    the same computation as ``predict_logits`` but on a ``(H, W, C)`` torch
    tensor, so gradients flow to the input.
    """

    capabilities: frozenset

    def init(self, frame0, mask0): ...

    def predict_logits(self, state, frame) -> np.ndarray: ...

    def forward(self, state, frame_tensor) -> torch.Tensor: ...

    def input_gradient(self, state, frame, loss_evaluator) -> np.ndarray: ...

    def perturbable_region(self, state, frame) -> Optional[np.ndarray]: ...


def _encoder(in_ch, ch):
    return nn.Sequential(
        nn.Conv2d(in_ch, ch, 3, padding=1), nn.SiLU(),
        nn.Conv2d(ch, ch, 3, padding=1), nn.SiLU(),
        nn.Conv2d(ch, ch, 3, padding=1),
    )


class ToyNet(nn.Module):
    def __init__(self, channels=16, in_channels=3):
        super().__init__()
        self.template_encoder = _encoder(in_channels, channels)
        self.search_encoder = _encoder(in_channels, channels)
        self.head = nn.Sequential(
            nn.Conv2d(2 * channels, channels, 3, padding=1), nn.SiLU(),
            nn.Conv2d(channels, 1, 1),
        )
        # per-channel input standardisation, fitted from training frames
        self.register_buffer("in_mean", torch.zeros(1, in_channels, 1, 1))
        self.register_buffer("in_std", torch.ones(1, in_channels, 1, 1))

    def standardize(self, x):
        return (x - self.in_mean) / self.in_std

    def prototypes(self, template, mask, region):
        """Foreground / background prototypes, each ``(B, C)``.

        ``template`` is ``(B, C_in, H, W)``; ``mask`` and ``region`` are
        ``(B, 1, H, W)``, background is pooled from ``region`` minus ``mask``.
        """
        feat = self.template_encoder(self.standardize(template))
        fg = (feat * mask).sum((2, 3)) / mask.sum((2, 3)).clamp_min(1.0)
        bg_w = region * (1.0 - mask)
        bg = (feat * bg_w).sum((2, 3)) / bg_w.sum((2, 3)).clamp_min(1.0)
        return fg, bg

    def forward(self, search, fg, bg):
        feat = self.search_encoder(self.standardize(search))
        corr = torch.cat([feat * fg[:, :, None, None], feat * bg[:, :, None, None]], 1)
        return self.head(corr)[:, 0]


@dataclass(frozen=True)
class TrackerState:
    fg_proto: torch.Tensor
    bg_proto: torch.Tensor
    frame_shape: tuple
    template_box: BoundingBox


def context_region(box: BoundingBox, shape, context=1.0):
    """Box enlarged by ``context`` times its size on every side, clipped to the frame."""
    h, w = shape
    pr, pc = int(np.ceil(box.height * context)), int(np.ceil(box.width * context))
    region = np.zeros((h, w), dtype=np.float64)
    region[max(0, box.row_min - pr):min(h, box.row_min + box.height + pr),
           max(0, box.col_min - pc):min(w, box.col_min + box.width + pc)] = 1.0
    return region


def _to_nchw(frames, dtype):
    return torch.as_tensor(np.asarray(frames), dtype=dtype).permute(0, 3, 1, 2).contiguous()


class ToyTracker(BaseEstimator):
    """Trainable toy tracker with an sklearn-style ``fit``.

    Parameters
    ----------
    channels : int
        Feature width of both encoders.
    epochs : int
        Passes over the training set; each pass draws ``pairs_per_sequence``
        (template, search) pairs per sequence.
    pairs_per_sequence : int
    batch_size : int
    lr : float
        Adam learning rate.
    dice_weight : float
        Weight of the soft-dice term added to BCE during training.
    context : float
        Background context around the template box, in box sizes.
    seed : int
    """

    capabilities = frozenset({"predicts_logits", "provides_input_gradient", "perturbable_region"})

    def __init__(self, channels=16, epochs=30, pairs_per_sequence=8, batch_size=32, lr=3e-3,
                 dice_weight=1.0, context=1.0, seed=0):
        self.channels = channels
        self.epochs = epochs
        self.pairs_per_sequence = pairs_per_sequence
        self.batch_size = batch_size
        self.lr = lr
        self.dice_weight = dice_weight
        self.context = context
        self.seed = seed

    # -- training -----------------------------------------------------------

    def _build(self, in_channels=3):
        torch.manual_seed(self.seed)
        return ToyNet(self.channels, in_channels)

    def fit(self, sequences, y=None, verbose=False):
        """Train on a list of :class:`SyntheticSequence` (or frames/masks pairs)."""
        sequences = list(sequences)
        if not sequences:
            raise InvalidInputError("training set is empty")
        frames = [np.asarray(s.frames, dtype=np.float32) for s in sequences]
        masks = [np.asarray(s.masks, dtype=np.float32) for s in sequences]
        net = self._build(frames[0].shape[-1]).float()
        pixels = np.concatenate([f.reshape(-1, f.shape[-1]) for f in frames])
        net.in_mean.copy_(torch.as_tensor(pixels.mean(0))[None, :, None, None])
        net.in_std.copy_(torch.as_tensor(np.maximum(pixels.std(0), 1e-3))[None, :, None, None])
        self.train_history_ = []

        if self.epochs > 0:
            # tiny late-training gradients hit denormal floats, which are very slow on CPU
            torch.set_flush_denormal(True)
            try:
                self._train(net, sequences, frames, masks, verbose)
            finally:
                torch.set_flush_denormal(False)

        self._set_net(net)
        return self

    def _train(self, net, sequences, frames, masks, verbose):
        t_frames = np.stack([f[0] for f in frames])
        t_masks = np.stack([m[0] for m in masks])
        regions = np.stack([context_region(bbox_from_mask(m[0].astype(np.uint8)),
                                           m[0].shape, self.context) for m in masks])
        rng = np.random.default_rng(self.seed)
        opt = torch.optim.Adam(net.parameters(), lr=self.lr)
        n_steps_epoch = max(1, len(sequences) * self.pairs_per_sequence // self.batch_size)
        sched = torch.optim.lr_scheduler.CosineAnnealingLR(opt, self.epochs * n_steps_epoch)
        for epoch in range(self.epochs):
            total = 0.0
            for _ in range(n_steps_epoch):
                si = rng.integers(0, len(sequences), size=self.batch_size)
                ti = np.array([rng.integers(0, len(frames[s])) for s in si])
                tmpl = _to_nchw(t_frames[si], torch.float32)
                tm = torch.as_tensor(t_masks[si])[:, None]
                reg = torch.as_tensor(regions[si], dtype=torch.float32)[:, None]
                search = _to_nchw(np.stack([frames[s][t] for s, t in zip(si, ti)]), torch.float32)
                target = torch.as_tensor(np.stack([masks[s][t] for s, t in zip(si, ti)]))
                fg, bg = net.prototypes(tmpl, tm, reg)
                logits = net(search, fg, bg)
                loss = F.binary_cross_entropy_with_logits(logits, target)
                p = torch.sigmoid(logits)
                inter = (p * target).sum((1, 2))
                dice = 1 - (2 * inter + 1) / (p.sum((1, 2)) + target.sum((1, 2)) + 1)
                loss = loss + self.dice_weight * dice.mean()
                if not torch.isfinite(loss):
                    raise TrainingError(f"training loss became non-finite at epoch {epoch}")
                opt.zero_grad()
                loss.backward()
                opt.step()
                sched.step()
                total += float(loss.detach())
            self.train_history_.append(total / n_steps_epoch)
            if verbose:
                print(f"epoch {epoch + 1}/{self.epochs} loss {self.train_history_[-1]:.4f}")

    def _set_net(self, net):
        self.net_ = net.double().eval()
        for p in self.net_.parameters():
            p.requires_grad_(False)
        self.weights_ = {k: v.detach().numpy().copy() for k, v in self.net_.state_dict().items()}
        self.receptive_field_ = 13  # 6 stacked 3x3 convolutions

    # -- tracking -------------------------------------------------------------

    def init(self, frame0, mask0) -> TrackerState:
        """Pool template prototypes from the first frame around its mask."""
        check_is_fitted(self, "net_")
        frame0 = check_frame(frame0, name="frame0")
        mask0 = check_mask(mask0, name="mask0")
        if mask0.shape != frame0.shape[:2]:
            raise InvalidInputError("mask0 shape does not match frame0")
        box = bbox_from_mask(mask0)
        if box is None:
            raise InvalidInputError("initial mask is empty")
        region = context_region(box, mask0.shape, self.context)
        with torch.no_grad():
            fg, bg = self.net_.prototypes(
                _to_nchw(frame0[None], torch.float64),
                torch.as_tensor(mask0, dtype=torch.float64)[None, None],
                torch.as_tensor(region)[None, None])
        return TrackerState(fg[0], bg[0], frame0.shape, box)

    def forward(self, state: TrackerState, frame_tensor):
        """Differentiable logits for an ``(H, W, C)`` float64 tensor."""
        if tuple(frame_tensor.shape) != tuple(state.frame_shape):
            raise InvalidInputError(
                f"frame shape {tuple(frame_tensor.shape)} != initialised shape {state.frame_shape}")
        x = frame_tensor.permute(2, 0, 1)[None]
        return self.net_(x, state.fg_proto[None], state.bg_proto[None])[0]

    def predict_logits(self, state: TrackerState, frame):
        frame = check_frame(frame)
        with torch.no_grad():
            return self.forward(state, torch.as_tensor(frame)).numpy()

    def predict(self, state: TrackerState, frame):
        return (self.predict_logits(state, frame) > 0).astype(np.uint8)

    def input_gradient(self, state: TrackerState, frame, loss_evaluator):
        """Gradient of ``loss_evaluator(logits)`` with respect to every input pixel."""
        frame = check_frame(frame)
        x = torch.tensor(frame, requires_grad=True)
        loss = loss_evaluator(self.forward(state, x))
        if not torch.is_tensor(loss) or not loss.requires_grad:
            return np.zeros_like(frame)
        (grad,) = torch.autograd.grad(loss, x)
        grad = grad.numpy()
        if not np.all(np.isfinite(grad)):
            raise GradientError("input gradient contains non-finite values")
        return grad

    def perturbable_region(self, state, frame):
        """The whole frame is perturbable (no search-region crop)."""
        return None

    # -- persistence ------------------------------------------------------------

    def save(self, path):
        """Write weights as magic + version + JSON header + npz payload."""
        check_is_fitted(self, "weights_")
        header = json.dumps({"params": self.get_params(), "in_channels":
                             int(self.weights_["search_encoder.0.weight"].shape[1])},
                            sort_keys=True).encode()
        buf = io.BytesIO()
        np.savez(buf, **self.weights_)
        with open(path, "wb") as fh:
            fh.write(WEIGHTS_MAGIC)
            fh.write(struct.pack("<HI", WEIGHTS_VERSION, len(header)))
            fh.write(header)
            fh.write(buf.getvalue())

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            blob = fh.read()
        if not blob.startswith(WEIGHTS_MAGIC):
            raise InvalidInputError(f"{path}: not a toy tracker weights file")
        off = len(WEIGHTS_MAGIC)
        version, n = struct.unpack_from("<HI", blob, off)
        if version != WEIGHTS_VERSION:
            raise InvalidInputError(f"{path}: unsupported weights version {version}")
        off += struct.calcsize("<HI")
        header = json.loads(blob[off:off + n])
        arrays = np.load(io.BytesIO(blob[off + n:]))
        tracker = cls(**header["params"])
        net = ToyNet(tracker.channels, header["in_channels"])
        net.load_state_dict({k: torch.as_tensor(arrays[k]) for k in arrays.files})
        tracker._set_net(net)
        return tracker
