"""Benchmark, sweep and ablation runners with on-disk persistence.

Output layout under ``out``::

    report.json                 every RunReport plus config snapshot
    summary.csv                 one row per (attack, sequence) and an overall row per attack
    <attack>/records.jsonl      one FrameRecord per line
    <attack>/masks.npz          predicted (and annotated) masks per sequence
"""

import csv
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import clone
from sklearn.model_selection import ParameterGrid

from ..attack import TrackPGD, attack_sequence
from ..toy import ToyTracker, generate_toy_sequences
from .config import validate_config
from .io import Sequence, load_dataset
from .metrics import bbox_overlap, contour_f, failure_frames, jaccard

SUMMARY_FIELDS = ["attack", "sequence", "frames", "J", "F", "JF", "failures", "robustness", "overlap"]


def r9(x):
    """Round to 9 significant digits (None passes through)."""
    return None if x is None else float(f"{x:.9g}")


@dataclass
class FrameRecord:
    sequence: str
    frame: int
    jaccard: Optional[float]
    contour_f: Optional[float]
    jf: Optional[float]
    bbox_iou: Optional[float]
    loss: Optional[dict]
    loss_curve: List[float]
    linf: float
    adv_min: float
    adv_max: float
    failure: bool
    pred_area: int
    gt_area: Optional[int]

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True)


@dataclass
class RunReport:
    attack: str
    per_sequence: Dict[str, dict]
    mean_j: Optional[float]
    mean_f: Optional[float]
    mean_jf: Optional[float]
    total_failures: int
    robustness: Optional[float]
    overlap: Optional[float]
    n_frames: int
    config: dict = field(default_factory=dict)
    wall_clock: float = 0.0


def _mean(values):
    values = [v for v in values if v is not None]
    return r9(float(np.mean(values))) if values else None


def evaluate_sequence(tracker, seq: Sequence, attack: TrackPGD, contour_tol=1, reinit_gap=5):
    """Attack-and-track one sequence; return ``(records, predicted masks)``."""
    steps = attack_sequence(tracker, seq.frames, seq.masks[0], attack.config())
    records, preds = [], []
    for step in steps:
        gt = seq.masks[step.index]
        pred = step.pred_mask
        res = step.result
        j = f = jf = box = None
        if gt is not None:
            j, f = r9(jaccard(pred, gt)), r9(contour_f(pred, gt, contour_tol))
            jf = r9((j + f) / 2)
            box = r9(bbox_overlap(pred, gt))
        last = res.per_iter_losses[-1].to_dict() if res.per_iter_losses else None
        records.append(FrameRecord(
            sequence=seq.name, frame=step.index, jaccard=j, contour_f=f, jf=jf, bbox_iou=box,
            loss=None if last is None else {k: r9(v) for k, v in last.items()},
            loss_curve=[r9(b.total) for b in res.per_iter_losses],
            linf=r9(res.linf_norm), adv_min=r9(float(res.adv_frame.min())),
            adv_max=r9(float(res.adv_frame.max())), failure=False,
            pred_area=int(pred.sum()), gt_area=None if gt is None else int(gt.sum()),
        ))
        preds.append(pred)
    for i in failure_frames([r.bbox_iou for r in records], reinit_gap):
        records[i].failure = True
    return records, preds


def summarize(attack_name, records: List[FrameRecord], config=None, wall_clock=0.0) -> RunReport:
    """Aggregate per-frame records (sequence means, then mean over sequences)."""
    by_seq: Dict[str, List[FrameRecord]] = {}
    for r in records:
        by_seq.setdefault(r.sequence, []).append(r)
    per_seq = {}
    for name, recs in by_seq.items():
        failures = sum(r.failure for r in recs)
        per_seq[name] = {
            "frames": len(recs),
            "J": _mean([r.jaccard for r in recs]),
            "F": _mean([r.contour_f for r in recs]),
            "JF": _mean([r.jf for r in recs]),
            "failures": failures,
            "robustness": r9(failures / len(recs)),
            "overlap": _mean([r.jaccard for r in recs]),
        }
    seqs = list(per_seq.values())
    return RunReport(
        attack=attack_name, per_sequence=per_seq,
        mean_j=_mean([s["J"] for s in seqs]), mean_f=_mean([s["F"] for s in seqs]),
        mean_jf=_mean([s["JF"] for s in seqs]),
        total_failures=int(sum(s["failures"] for s in seqs)),
        robustness=_mean([s["robustness"] for s in seqs]),
        overlap=_mean([s["overlap"] for s in seqs]),
        n_frames=len(records), config=config or {}, wall_clock=wall_clock,
    )


def read_records(path) -> List[FrameRecord]:
    with open(path) as fh:
        return [FrameRecord(**json.loads(line)) for line in fh if line.strip()]


def resolve_tracker(cfg):
    tcfg = cfg["tracker"]
    if "weights" in tcfg:
        return ToyTracker.load(tcfg["weights"])
    train = tcfg["train"]
    data = {"seed": 0, "count": 200, "length": 12, "frame_size": 32, **train.get("data", {})}
    seqs = generate_toy_sequences(data["seed"], data["count"], data["length"], data["frame_size"])
    params = {k: train[k] for k in ("epochs", "channels", "lr") if k in train}
    return ToyTracker(seed=train.get("seed", cfg["seed"]), **params).fit(seqs)


def resolve_sequences(cfg) -> List[Sequence]:
    dcfg = cfg["dataset"]
    if "path" in dcfg:
        return load_dataset(dcfg["path"], dcfg.get("limit"))
    toy = {"seed": 1, "count": 20, "length": 12, "frame_size": 32, **dcfg["toy"]}
    count = min(toy["count"], dcfg.get("limit", toy["count"]))
    return [Sequence(s.name, s.frames, list(s.masks))
            for s in generate_toy_sequences(toy["seed"], count, toy["length"], toy["frame_size"])]


def make_attack(cfg, kind, **overrides) -> TrackPGD:
    params = {**cfg.get("attack", {}), **overrides}
    return TrackPGD(attack_kind=kind, seed=cfg.get("seed", 0), **params)


def run_attack(tracker, sequences, attack: TrackPGD, contour_tol=1, reinit_gap=5, n_jobs=1):
    if n_jobs == 1:
        results = [evaluate_sequence(tracker, s, attack, contour_tol, reinit_gap) for s in sequences]
    else:
        results = Parallel(n_jobs=n_jobs)(
            delayed(evaluate_sequence)(tracker, s, attack, contour_tol, reinit_gap) for s in sequences)
    records = [r for recs, _ in results for r in recs]
    masks = {s.name: preds for s, (_, preds) in zip(sequences, results)}
    return records, masks


def _write_attack(out: Path, kind, records, masks, sequences):
    d = out / kind
    d.mkdir(parents=True, exist_ok=True)
    with open(d / "records.jsonl", "w") as fh:
        for r in records:
            fh.write(r.to_json() + "\n")
    arrays = {}
    for s in sequences:
        arrays[f"{s.name}/pred"] = np.stack(masks[s.name])
        if s.fully_annotated:
            arrays[f"{s.name}/gt"] = np.stack(s.masks[1:])
    np.savez_compressed(d / "masks.npz", **arrays)


def _write_summary(out: Path, reports: Dict[str, RunReport]):
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SUMMARY_FIELDS)
        w.writeheader()
        for kind, rep in reports.items():
            for name, s in rep.per_sequence.items():
                w.writerow({"attack": kind, "sequence": name, **s})
            w.writerow({"attack": kind, "sequence": "ALL", "frames": rep.n_frames, "J": rep.mean_j,
                        "F": rep.mean_f, "JF": rep.mean_jf, "failures": rep.total_failures,
                        "robustness": rep.robustness, "overlap": rep.overlap})
    with open(out / "report.json", "w") as fh:
        json.dump({k: asdict(v) for k, v in reports.items()}, fh, indent=2, sort_keys=True)


def run_benchmark(config, out=None, tracker=None, sequences=None) -> Dict[str, RunReport]:
    """Run every configured attack over the dataset and persist the results.

    ``config`` is a mapping (validated here before anything runs). ``tracker``
    and ``sequences`` override the ones the config would resolve.
    """
    cfg = validate_config(config)
    tracker = resolve_tracker(cfg) if tracker is None else tracker
    sequences = resolve_sequences(cfg) if sequences is None else sequences
    out = Path(out if out is not None else cfg["out"])
    ev = cfg["eval"]
    reports = {}
    for kind in cfg["attacks"]:
        attack = make_attack(cfg, kind)
        t0 = time.perf_counter()
        records, masks = run_attack(tracker, sequences, attack, ev["contour_tol"],
                                    ev["reinit_gap"], ev["n_jobs"])
        snapshot = {**cfg, "resolved_attack": attack.get_params()}
        reports[kind] = summarize(kind, records, snapshot, time.perf_counter() - t0)
        _write_attack(out, kind, records, masks, sequences)
    _write_summary(out, reports)
    return reports


def _mean_jf(tracker, sequences, attack, ev):
    records, _ = run_attack(tracker, sequences, attack, ev["contour_tol"], ev["reinit_gap"], ev["n_jobs"])
    return summarize(attack.attack_kind, records).mean_jf


def sweep(config, out=None, tracker=None, sequences=None):
    """Coefficient study of the composite loss.

    ``mode: table`` varies lambda1 with lambda2 = 0 and lambda2 with
    lambda1 = 0; ``mode: grid`` evaluates the full product. Cells are mean
    J&F in percent. ``mode: ablation`` is delegated to :func:`ablation`.
    """
    cfg = validate_config(config)
    scfg = cfg["sweep"]
    if scfg["mode"] == "ablation":
        return ablation(cfg, out, tracker, sequences)
    tracker = resolve_tracker(cfg) if tracker is None else tracker
    sequences = resolve_sequences(cfg) if sequences is None else sequences
    base = make_attack(cfg, "trackpgd")
    name = cfg["tracker"].get("name", "toy")

    def cell(params):
        return r9(100 * _mean_jf(tracker, sequences, clone(base).set_params(**params), cfg["eval"]))

    rows = []
    if scfg["mode"] == "table":
        l1 = [cell({"lambda1": v, "lambda2": 0.0}) for v in scfg["lambda1"]]
        l2 = [cell({"lambda1": 0.0, "lambda2": v}) for v in scfg["lambda2"]]
        result = {"lambda1": dict(zip(scfg["lambda1"], l1)), "lambda2": dict(zip(scfg["lambda2"], l2))}
        rows.append(["lambda1 (lambda2=0)"] + scfg["lambda1"])
        rows.append([name] + l1)
        rows.append(["lambda2 (lambda1=0)"] + scfg["lambda2"])
        rows.append([name] + l2)
    else:
        grid = list(ParameterGrid({"lambda1": scfg["lambda1"], "lambda2": scfg["lambda2"]}))
        result = {(p["lambda1"], p["lambda2"]): cell(p) for p in grid}
        rows.append([f"{name}: lambda1 \\ lambda2"] + scfg["lambda2"])
        for a in scfg["lambda1"]:
            rows.append([a] + [result[(a, b)] for b in scfg["lambda2"]])

    if out is not None or "out" in config:
        path = Path(out if out is not None else cfg["out"])
        path.mkdir(parents=True, exist_ok=True)
        with open(path / "sweep_table.csv", "w", newline="") as fh:
            csv.writer(fh).writerows(rows)
    return result


ABLATION_COLUMNS = ("none", "segpgd_obj", "segpgd_bg", "trackpgd")


def ablation(config, out=None, tracker=None, sequences=None):
    """Mean J (percent) of the clean run, the two SegPGD variants and the difference loss.

    With a toy dataset, each entry of ``sweep.seeds`` regenerates the
    sequences with that seed; the returned dict maps seed to a column dict and
    ``"mean"`` to the average over seeds.
    """
    cfg = validate_config(config)
    tracker = resolve_tracker(cfg) if tracker is None else tracker
    seeds = cfg["sweep"].get("seeds")
    if sequences is not None or "toy" not in cfg["dataset"] or not seeds:
        datasets = {"default": resolve_sequences(cfg) if sequences is None else sequences}
    else:
        datasets = {}
        for s in seeds:
            c = {**cfg, "dataset": {**cfg["dataset"], "toy": {**cfg["dataset"]["toy"], "seed": s}}}
            datasets[s] = resolve_sequences(c)
    ev = cfg["eval"]
    result = {}
    for key, seqs in datasets.items():
        row = {}
        for kind in ABLATION_COLUMNS:
            records, _ = run_attack(tracker, seqs, make_attack(cfg, kind), ev["contour_tol"],
                                    ev["reinit_gap"], ev["n_jobs"])
            row[kind] = r9(100 * summarize(kind, records).mean_j)
        result[key] = row
    result["mean"] = {k: r9(float(np.mean([result[s][k] for s in datasets]))) for k in ABLATION_COLUMNS}

    if out is not None or "out" in config:
        path = Path(out if out is not None else cfg["out"])
        path.mkdir(parents=True, exist_ok=True)
        with open(path / "ablation_table.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["dataset"] + list(ABLATION_COLUMNS))
            for key, row in result.items():
                w.writerow([key] + [row[k] for k in ABLATION_COLUMNS])
    return result
