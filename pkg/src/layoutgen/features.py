"""Layout features: normalized pairwise-distance matrices."""

from __future__ import annotations

import numpy as np


class DegenerateLayoutError(ValueError):
    """All points coincide; the distance feature cannot be normalized."""


def pairwise_distances(positions: np.ndarray) -> np.ndarray:
    """Euclidean distance matrix of an (n, 2) position array.

    Also accepts a batch (b, n, 2), returning (b, n, n).
    """
    p = np.asarray(positions, dtype=np.float64)
    diff = p[..., :, None, :] - p[..., None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def layout_feature(positions: np.ndarray) -> np.ndarray:
    """Distance matrix divided by its mean over all n^2 entries (diagonal included).

    Invariant to rigid transforms and uniform scaling; mean of the result is 1.
    """
    d = pairwise_distances(positions)
    dbar = d.mean(axis=(-2, -1), keepdims=True)
    if np.any(dbar <= 0.0):
        raise DegenerateLayoutError("all points coincide; mean pairwise distance is zero")
    return d / dbar


def gaussian_kernel_feature(positions: np.ndarray, sigma: float) -> np.ndarray:
    """exp(-D^2 / (2 sigma)) elementwise."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    d = pairwise_distances(positions)
    return np.exp(-(d * d) / (2.0 * sigma))
