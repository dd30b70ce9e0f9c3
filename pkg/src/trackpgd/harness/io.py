"""Dataset directories: ``<seq>/frames/%06d.png`` and ``<seq>/masks/%06d.png``."""

import os
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional

import numpy as np
from PIL import Image

from ..exceptions import IngestionError
from ..masks import image_to_mask, mask_to_image


@dataclass
class Sequence:
    name: str
    frames: np.ndarray  # (L, H, W, C) float64
    masks: List[Optional[np.ndarray]]  # one entry per frame, None when not annotated

    @property
    def fully_annotated(self):
        return all(m is not None for m in self.masks)

    def __len__(self):
        return len(self.frames)


def _read(path, mode):
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert(mode))
    except (OSError, ValueError) as exc:
        raise IngestionError(f"cannot read image {path}: {exc}") from exc


def load_sequence(path) -> Sequence:
    path = Path(path)
    frames_dir, masks_dir = path / "frames", path / "masks"
    if not frames_dir.is_dir():
        raise IngestionError(f"missing frames directory: {frames_dir}")
    frame_files = sorted(frames_dir.glob("*.png"))
    if not frame_files:
        raise IngestionError(f"no frames in {frames_dir}")
    frames, masks = [], []
    for i, f in enumerate(frame_files):
        if f.name != f"{i:06d}.png":
            raise IngestionError(f"unexpected frame file name {f} (expected {i:06d}.png)")
        img = _read(f, "RGB").astype(np.float64) / 255.0
        if frames and img.shape != frames[0].shape:
            raise IngestionError(f"frame {f} has shape {img.shape}, expected {frames[0].shape}")
        frames.append(img)
        mpath = masks_dir / f.name
        if mpath.exists():
            m = image_to_mask(_read(mpath, "L"))
            if m.shape != img.shape[:2]:
                raise IngestionError(f"mask {mpath} has shape {m.shape}, frame is {img.shape[:2]}")
            masks.append(m)
        else:
            masks.append(None)
    if masks[0] is None:
        raise IngestionError(f"first-frame mask is required: {masks_dir / frame_files[0].name}")
    return Sequence(path.name, np.stack(frames), masks)


def save_sequence(seq, root) -> Path:
    """Write a sequence (anything with ``name``, ``frames``, ``masks``) under ``root``."""
    out = Path(root) / seq.name
    (out / "frames").mkdir(parents=True, exist_ok=True)
    (out / "masks").mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(seq.frames):
        img = np.round(np.clip(frame, 0, 1) * 255).astype(np.uint8)
        Image.fromarray(img).save(out / "frames" / f"{i:06d}.png")
        if seq.masks[i] is not None:
            Image.fromarray(mask_to_image(seq.masks[i])).save(out / "masks" / f"{i:06d}.png")
    return out


def load_dataset(root, limit=None) -> List[Sequence]:
    root = Path(root)
    if not root.is_dir():
        raise IngestionError(f"dataset directory not found: {root}")
    names = sorted(d for d in os.listdir(root) if (root / d / "frames").is_dir())
    if not names:
        raise IngestionError(f"no sequences under {root}")
    if limit is not None:
        names = names[:limit]
    return [load_sequence(root / n) for n in names]
