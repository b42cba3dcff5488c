"""Offline RL with conservative Q-learning and augmentation-averaged value targets."""

__version__ = "0.1.0"
