"""Belief-function classification toolkit.

Exact Dempster-Shafer calculus on small frames, two trainable evidential
prototype layers (membership-discounting and weight-of-evidence), a small
feature network, training utilities, synthetic data generators, and
uncertainty/calibration metrics.
"""

from . import datasets, dst, enn, kmeans, metrics, mlp, model, numeric, rbf, training
from .model import EvidentialModel

__all__ = [
    "EvidentialModel",
    "datasets",
    "dst",
    "enn",
    "kmeans",
    "metrics",
    "mlp",
    "model",
    "numeric",
    "rbf",
    "training",
]
