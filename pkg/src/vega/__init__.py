"""Hyperparameter and architecture search over synthetic and tabular objectives."""

__version__ = "0.1.0"
