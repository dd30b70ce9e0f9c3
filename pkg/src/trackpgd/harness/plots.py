"""Figures from persisted benchmark output: mask overlays, loss curves, J per frame."""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from PIL import Image  # noqa: E402

from ..exceptions import InvalidInputError  # noqa: E402
from .benchmark import read_records  # noqa: E402


def overlay_image(attacked=None, clean=None, gt=None):
    """RGB uint8 image: red = attacked prediction, green = clean prediction, blue = annotation."""
    ref = next(m for m in (attacked, clean, gt) if m is not None)
    img = np.zeros(np.shape(ref) + (3,), dtype=np.uint8)
    for ch, m in enumerate((attacked, clean, gt)):
        if m is not None:
            img[..., ch] = np.asarray(m, dtype=np.uint8) * 255
    return img


def _load(report_dir):
    report_dir = Path(report_dir)
    attacks = sorted(p.name for p in report_dir.iterdir()
                     if (p / "records.jsonl").is_file()) if report_dir.is_dir() else []
    if not attacks:
        raise InvalidInputError(f"no benchmark records under {report_dir}")
    records = {a: read_records(report_dir / a / "records.jsonl") for a in attacks}
    if not any(records.values()):
        raise InvalidInputError(f"benchmark report under {report_dir} is empty")
    masks = {a: np.load(report_dir / a / "masks.npz") for a in attacks}
    return attacks, records, masks


def render_plots(report_dir, out_dir=None, frame=None):
    """Write overlay, loss-curve and per-frame J figures; return the written paths."""
    attacks, records, masks = _load(report_dir)
    out_dir = Path(out_dir) if out_dir is not None else Path(report_dir) / "plots"
    out_dir.mkdir(parents=True, exist_ok=True)
    attacked = [a for a in attacks if a != "none"]
    written = []

    sequences = sorted({r.sequence for recs in records.values() for r in recs})
    for seq in sequences:
        # overlay of one frame per attacked run
        for a in attacked or attacks:
            preds = masks[a][f"{seq}/pred"]
            i = len(preds) // 2 if frame is None else frame
            clean = masks["none"][f"{seq}/pred"][i] if "none" in masks else None
            gt = masks[a][f"{seq}/gt"][i] if f"{seq}/gt" in masks[a].files else None
            path = out_dir / f"{seq}_{a}_overlay.png"
            Image.fromarray(overlay_image(preds[i] if a != "none" else None, clean, gt)).save(path)
            written.append(path)

        fig, ax = plt.subplots(figsize=(5, 3.5))
        for a in attacks:
            recs = [r for r in records[a] if r.sequence == seq]
            ax.plot([r.frame for r in recs], [r.jaccard if r.jaccard is not None else np.nan
                                              for r in recs], marker="o", ms=3, label=a)
        ax.set_xlabel("frame")
        ax.set_ylabel("J")
        ax.set_ylim(-0.02, 1.02)
        ax.legend(fontsize=7)
        ax.set_title(seq)
        path = out_dir / f"{seq}_jaccard.png"
        fig.tight_layout()
        fig.savefig(path, dpi=80)
        plt.close(fig)
        written.append(path)

        fig, ax = plt.subplots(figsize=(5, 3.5))
        for a in attacked:
            curves = [r.loss_curve for r in records[a] if r.sequence == seq and r.loss_curve]
            if curves:
                ax.plot(range(1, len(curves[0]) + 1), np.mean(curves, axis=0), label=a)
        ax.set_xlabel("iteration")
        ax.set_ylabel("mean loss")
        if attacked:
            ax.legend(fontsize=7)
        ax.set_title(seq)
        path = out_dir / f"{seq}_loss.png"
        fig.tight_layout()
        fig.savefig(path, dpi=80)
        plt.close(fig)
        written.append(path)
    return written
