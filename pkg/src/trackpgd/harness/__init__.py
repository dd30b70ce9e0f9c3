from .benchmark import (FrameRecord, RunReport, ablation, evaluate_sequence, read_records,
                        run_benchmark, summarize, sweep)
from .config import load_config, validate_config
from .io import Sequence, load_dataset, load_sequence, save_sequence
from .metrics import (bbox_overlap, contour_f, failure_frames, jaccard, reset_robustness,
                      unsupervised_overlap)
from .plots import render_plots

__all__ = [
    "FrameRecord", "RunReport", "ablation", "evaluate_sequence", "read_records", "run_benchmark",
    "summarize", "sweep", "load_config", "validate_config", "Sequence", "load_dataset",
    "load_sequence", "save_sequence", "bbox_overlap", "contour_f", "failure_frames", "jaccard",
    "reset_robustness", "unsupervised_overlap", "render_plots",
]
