"""Regret and compensation curves, and their aggregation over replications."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import BanditInstance
from .policies import EpisodeTrace

BASE_METRICS = ("pseudo_regret", "realized_regret", "compensation_total")


def metric_names(n_arms: int) -> list[str]:
    return [*BASE_METRICS, *(f"compensation_arm{i}" for i in range(n_arms))]


@dataclass(frozen=True)
class CurvePoint:
    t: int
    mean: float
    stderr: float
    n_reps: int


def _check(trace: EpisodeTrace, instance: BanditInstance) -> None:
    if trace.n_arms != instance.n_arms:
        raise ValueError(f"trace has {trace.n_arms} arms but instance has {instance.n_arms}")
    if trace.horizon and (trace.arms.min() < 0 or trace.arms.max() >= instance.n_arms):
        raise ValueError("trace contains arms outside the instance")


def pseudo_regret_curve(trace: EpisodeTrace, instance: BanditInstance) -> np.ndarray:
    """Cumulative sum of the gaps of the pulled arms."""
    _check(trace, instance)
    return np.cumsum(instance.gaps[trace.arms])


def realized_regret_curve(trace: EpisodeTrace, instance: BanditInstance) -> np.ndarray:
    """``t * best_mean`` minus the rewards actually collected; may go negative."""
    _check(trace, instance)
    t = np.arange(1, trace.horizon + 1)
    return t * instance.best_mean - np.cumsum(trace.rewards)


def compensation_curve(trace: EpisodeTrace, arm: int | None = None) -> np.ndarray:
    if arm is None:
        return np.cumsum(trace.compensations)
    if not 0 <= arm < trace.n_arms:
        raise IndexError(f"arm {arm} out of range for {trace.n_arms} arms")
    return np.cumsum(np.where(trace.arms == arm, trace.compensations, 0.0))


def thin_index(length: int, stride: int) -> np.ndarray:
    """Zero-based positions kept by thinning: ``t = stride, 2*stride, ...`` and always ``t = length``."""
    if stride < 1:
        raise ValueError("stride must be >= 1")
    t = np.arange(1, math.ceil(length / stride) + 1) * stride
    return np.minimum(t, length) - 1


def trace_metrics(trace: EpisodeTrace, instance: BanditInstance, stride: int = 1) -> np.ndarray:
    """All metric curves of one trace, thinned, stacked in :func:`metric_names` order."""
    keep = thin_index(trace.horizon, stride)
    comps = np.zeros((trace.horizon, trace.n_arms))
    comps[np.arange(trace.horizon), trace.arms] = trace.compensations
    per_arm = np.cumsum(comps, axis=0)[keep].T
    return np.vstack(
        [
            pseudo_regret_curve(trace, instance)[keep],
            realized_regret_curve(trace, instance)[keep],
            compensation_curve(trace)[keep],
            per_arm,
        ]
    )


def summarize(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mean and standard error over axis 0 (replications).

    Values are sorted along the replication axis before reduction, which makes
    the result independent of replication order bit for bit. A single
    replication has standard error 0.
    """
    values = np.sort(np.asarray(values, dtype=np.float64), axis=0)
    n = values.shape[0]
    mean = values.mean(axis=0)
    if n == 1:
        return mean, np.zeros_like(mean)
    return mean, values.std(axis=0, ddof=1) / math.sqrt(n)


def aggregate(curves: Sequence[np.ndarray], thin: int = 1) -> list[CurvePoint]:
    """Collapse equal-length per-replication curves into thinned mean/stderr points."""
    if not len(curves):
        raise ValueError("no curves to aggregate")
    lengths = {len(c) for c in curves}
    if len(lengths) != 1:
        raise ValueError(f"ragged curves: lengths {sorted(lengths)}")
    (length,) = lengths
    keep = thin_index(length, thin)
    stacked = np.vstack([np.asarray(c, dtype=np.float64)[keep] for c in curves])
    mean, stderr = summarize(stacked)
    return [CurvePoint(int(k) + 1, float(m), float(s), len(curves)) for k, m, s in zip(keep, mean, stderr)]
