"""Offline datasets: collection, splits, subsampling, sampling and the S4RLDS1 file format."""

from .core import (SPLIT_KINDS, Batch, OfflineDataset, ReplayBuffer, Transition, collect, concat,
                   empty_dataset, sample_batch, sample_transitions, subsample)
from .io import load, read_header, save
from .splits import BehaviorConfig, BehaviorRun, behavior_run, make_split, train_behavior

__all__ = [
    "SPLIT_KINDS", "Batch", "BehaviorConfig", "BehaviorRun", "OfflineDataset", "ReplayBuffer",
    "Transition", "behavior_run", "collect", "concat", "empty_dataset", "load", "make_split",
    "read_header", "sample_batch", "sample_transitions", "save", "subsample", "train_behavior",
]
