"""Synthetic moving-object sequences with exact per-frame masks."""

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

# object pixels must stay this far (RGB Euclidean) from every background and
# distractor colour so the mask is recoverable from appearance alone
MIN_COLOR_DISTANCE = 0.35
AREA_RANGE = (0.03, 0.16)
AREA_LIMITS = (0.01, 0.25)


@dataclass
class SyntheticSequence:
    frames: np.ndarray  # (L, H, W, 3) float64, multiples of 1/255
    masks: np.ndarray  # (L, H, W) uint8
    centers: np.ndarray  # (L, 2) object centre (row, col)
    semi_axes: np.ndarray  # (L, 2) object half extents (rows, cols)
    seed: int
    shape_kind: str
    object_color: np.ndarray
    background_colors: np.ndarray
    distractor_colors: np.ndarray
    name: str = ""
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.frames)


def _far_color(rng, avoid, min_dist, tries=1000):
    for _ in range(tries):
        c = rng.uniform(0.05, 0.95, size=3)
        if all(np.linalg.norm(c - a) >= min_dist for a in avoid):
            return c
    raise RuntimeError("could not sample a sufficiently distinct colour")


def _shape_mask(kind, center, semi, h, w):
    rr, cc = np.mgrid[0:h, 0:w].astype(np.float64)
    dy = (rr - center[0]) / semi[0]
    dx = (cc - center[1]) / semi[1]
    if kind == "ellipse":
        return (dy ** 2 + dx ** 2) <= 1.0
    return (np.abs(dy) <= 1.0) & (np.abs(dx) <= 1.0)


def _shape_area(kind, semi):
    return (np.pi if kind == "ellipse" else 4.0) * semi[0] * semi[1]


def _smooth_field(rng, h, w, cells=4):
    coarse = rng.uniform(0.0, 1.0, size=(cells, cells))
    return np.clip(ndimage.zoom(coarse, (h / cells, w / cells), order=1)[:h, :w], 0, 1)


def _reflect(pos, vel, lo, hi):
    if pos < lo:
        pos, vel = lo + (lo - pos), abs(vel)
    elif pos > hi:
        pos, vel = hi - (pos - hi), -abs(vel)
    return min(max(pos, lo), hi), vel


def _generate_one(seed_seq, length, frame_size, n_distractors, noise, texture_amplitude,
                  contrast, keep_layers):
    rng = np.random.default_rng(seed_seq)
    h, w = frame_size
    hw = h * w
    kind = "ellipse" if rng.random() < 0.5 else "rectangle"

    obj_color = rng.uniform(0.15, 0.85, size=3)
    bg_colors = np.stack([_far_color(rng, [obj_color], MIN_COLOR_DISTANCE) for _ in range(2)])
    n_dis = int(rng.integers(n_distractors[0], n_distractors[1] + 1))
    dis_colors = np.stack([_far_color(rng, [obj_color], MIN_COLOR_DISTANCE)
                           for _ in range(n_dis)]) if n_dis else np.zeros((0, 3))

    # initial size from a target area fraction and aspect ratio
    target = rng.uniform(*AREA_RANGE) * hw
    aspect = rng.uniform(0.6, 1.6)
    unit = _shape_area(kind, (1.0, 1.0))
    base = np.array([np.sqrt(target / unit * aspect), np.sqrt(target / unit / aspect)])
    scale = 1.0

    def clamp_semi(semi):
        semi = np.minimum(semi, [h / 2 - 1, w / 2 - 1])
        area = _shape_area(kind, semi)
        lo, hi = AREA_RANGE[0] * 0.7 * hw, AREA_RANGE[1] * 1.3 * hw
        if area < lo:
            semi = semi * np.sqrt(lo / area)
        elif area > hi:
            semi = semi * np.sqrt(hi / area)
        return semi

    semi = clamp_semi(base)
    center = np.array([rng.uniform(semi[0], h - 1 - semi[0]), rng.uniform(semi[1], w - 1 - semi[1])])
    vel = rng.uniform(-1.5, 1.5, size=2)

    dis_state = []
    for _ in range(n_dis):
        ds = rng.uniform(1.5, 0.25 * min(h, w), size=2)
        dc = np.array([rng.uniform(ds[0], h - 1 - ds[0]), rng.uniform(ds[1], w - 1 - ds[1])])
        dis_state.append([("ellipse" if rng.random() < 0.5 else "rectangle"), dc, ds,
                          rng.uniform(-1.0, 1.0, size=2)])

    bg_field = _smooth_field(rng, h, w)
    rr, cc = np.mgrid[0:h, 0:w]
    checker = np.where((rr + cc) % 2 == 0, 1.0, -1.0)[..., None]
    obj_tex = texture_amplitude * checker * rng.choice([-1.0, 1.0], size=3)

    frames, masks, centers, semis, layers = [], [], [], [], []
    for i in range(length):
        if i > 0:
            scale = float(np.clip(scale * rng.uniform(0.95, 1.05), 0.8, 1.25))
            semi = clamp_semi(base * scale)
            center = center + vel + rng.normal(0.0, 0.3, size=2)
            for k, (lo, hi) in enumerate(((semi[0], h - 1 - semi[0]), (semi[1], w - 1 - semi[1]))):
                center[k], vel[k] = _reflect(center[k], vel[k], lo, hi)
            for d in dis_state:
                d[1] = d[1] + d[3]
                for k, (lo, hi) in enumerate(((d[2][0], h - 1 - d[2][0]), (d[2][1], w - 1 - d[2][1]))):
                    d[1][k], d[3][k] = _reflect(d[1][k], d[3][k], lo, hi)

        img = bg_colors[0] * (1 - bg_field[..., None]) + bg_colors[1] * bg_field[..., None]
        for (dkind, dc, ds, _), col in zip(dis_state, dis_colors):
            img[_shape_mask(dkind, dc, ds, h, w)] = col
        backdrop = img.copy()
        m = _shape_mask(kind, center, semi, h, w)
        # texture moves with the object
        shift = np.round(center - centers[0] if centers else np.zeros(2)).astype(int)
        tex = np.roll(obj_tex, tuple(shift), axis=(0, 1))
        img[m] = obj_color + tex[m]
        if keep_layers:
            layers.append((0.5 + contrast * (backdrop - 0.5), 0.5 + contrast * (img - 0.5)))
        img = img + rng.normal(0.0, noise, size=img.shape)
        img = 0.5 + contrast * (img - 0.5)
        img = np.round(np.clip(img, 0.0, 1.0) * 255.0) / 255.0

        frames.append(img)
        masks.append(m.astype(np.uint8))
        centers.append(center.copy())
        semis.append(semi.copy())

    return SyntheticSequence(
        frames=np.stack(frames), masks=np.stack(masks), centers=np.stack(centers),
        semi_axes=np.stack(semis), seed=0, shape_kind=kind, object_color=obj_color,
        background_colors=bg_colors, distractor_colors=dis_colors,
        meta={"layers": layers} if keep_layers else {},
    )


def generate_toy_sequences(seed, count, length, frame_size=32, *, n_distractors=(1, 3), noise=0.02,
                           texture_amplitude=0.0, contrast=0.25, keep_layers=False):
    """Generate ``count`` sequences of ``length`` frames each.

    The object is an ellipse or rectangle drifting over a smooth two-colour
    background with distractor shapes; an optional checkerboard of
    ``texture_amplitude`` moves with it. Frames are rendered at low dynamic
    range: every pixel is pulled towards mid-grey by ``contrast`` (1 keeps the
    full range). ``keep_layers`` stores the noise-free render before and after
    the object is painted, per frame, in ``meta["layers"]``.

    Sequence ``i`` depends only on ``(seed, i)``, so growing ``count`` keeps the
    earlier sequences unchanged.
    """
    if count < 1 or length < 1:
        raise ValueError("count and length must be >= 1")
    if not 0.0 < contrast <= 1.0:
        raise ValueError(f"contrast must lie in (0, 1], got {contrast}")
    if np.isscalar(frame_size):
        frame_size = (int(frame_size), int(frame_size))
    children = np.random.SeedSequence(seed).spawn(count)
    out = []
    for i, child in enumerate(children):
        seq = _generate_one(child, length, frame_size, n_distractors, noise,
                            texture_amplitude, contrast, keep_layers)
        seq.seed = int(seed)
        seq.name = f"toy_{seed}_{i:04d}"
        out.append(seq)
    return out
