from .synthetic import SyntheticSequence, generate_toy_sequences
from .tracker import ToyNet, ToyTracker, TrackerAdapter, TrackerState

__all__ = ["SyntheticSequence", "generate_toy_sequences", "ToyNet", "ToyTracker",
           "TrackerAdapter", "TrackerState"]
