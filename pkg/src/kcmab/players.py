"""Myopic short-term players and the controller's minimal payment rule."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .core import UnobservedArmError


def _checked_means(means: Sequence[float]) -> np.ndarray:
    arr = np.asarray(means, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("means must be a non-empty 1-d array")
    if np.isnan(arr).any():
        raise UnobservedArmError(f"arms {np.flatnonzero(np.isnan(arr)).tolist()} have no empirical mean")
    return arr


def min_compensation(means: Sequence[float], target: int) -> float:
    """Smallest payment that makes a greedy player willing to pull ``target``.

    Equals ``max(means) - means[target]``; zero exactly when ``target`` already
    has the largest empirical mean. Unobserved arms are passed as NaN.
    """
    arr = _checked_means(means)
    if not 0 <= target < arr.size:
        raise IndexError(f"target {target} out of range for {arr.size} arms")
    return float(arr.max() - arr[target])


def greedy_choice(means: Sequence[float], offer: Sequence[float] | None = None) -> int:
    """Arm a player pulls: lowest index maximizing ``mean + compensation``."""
    arr = _checked_means(means)
    if offer is None:
        return int(np.argmax(arr))
    pay = np.asarray(offer, dtype=np.float64)
    if pay.shape != arr.shape:
        raise ValueError(f"offer has shape {pay.shape}, expected {arr.shape}")
    if (pay < 0).any():
        raise ValueError("compensations must be nonnegative")
    return int(np.argmax(arr + pay))
