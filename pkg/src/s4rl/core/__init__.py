"""Numeric core: dense networks, Adam, seeded random streams."""

from . import backend
from .adam import AdamState, adam_step
from .net import (DenseNet, Tape, backward, forward, init_dense, load_checkpoint, predict,
                  save_checkpoint)
from .rng import SeededRng, rng_split


def polyak_update(target: DenseNet, online: DenseNet, tau: float) -> None:
    """``target <- tau * online + (1 - tau) * target``, elementwise and in place."""
    for t, o in zip(target.params(), online.params()):
        backend.kernels.polyak_update(t, o, float(tau))


__all__ = [
    "AdamState", "DenseNet", "SeededRng", "Tape", "adam_step", "backend", "backward",
    "forward", "init_dense", "load_checkpoint", "polyak_update", "predict", "rng_split",
    "save_checkpoint",
]
