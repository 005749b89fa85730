"""Optimal-stopping machinery behind the logarithmic compensation lower bound.

Think of the first ``T`` rewards of the best arm, a Bernoulli(mu) sequence,
and of an adversary that may stop after any prefix ``s`` with probability
``q(s)`` and is scored by the empirical mean ``#ones(s) / len(s)`` of the
stopped prefix. ``emp_value`` computes the expected score of a given stopping
rule; ``dp_value`` computes the smallest achievable score by backward
induction over ``(ones, zeros)`` counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import BanditInstance, Bernoulli

STRING_HORIZON_CAP = 16
COMPACT_HORIZON_CAP = 5000


class InfiniteDivergenceError(ValueError):
    pass


def _xlogy_ratio(x: float, y: float) -> float:
    return 0.0 if x == 0.0 else x * math.log(x / y)


def bernoulli_kl(p: float, q: float) -> float:
    """KL divergence between Bernoulli(p) and Bernoulli(q), natural log."""
    if not (0.0 <= p <= 1.0 and 0.0 <= q <= 1.0):
        raise ValueError(f"probabilities must lie in [0, 1], got p={p}, q={q}")
    if p == q:
        return 0.0
    if q in (0.0, 1.0):
        raise InfiniteDivergenceError(f"KL(Ber({p}) || Ber({q})) is infinite")
    return max(0.0, _xlogy_ratio(p, q) + _xlogy_ratio(1.0 - p, 1.0 - q))


@dataclass
class DpTable:
    """Stopping values ``f(a, b)`` for ``a`` ones and ``b`` zeros, ``1 <= a + b <= T``.

    ``rows[t]`` holds ``f(a, t - a)`` for ``a = 0..t``; ``rows[0]`` holds the
    root value. ``stop[t][a]`` records whether stopping at ``(a, t - a)`` is
    strictly better than continuing (always true at depth ``T``).
    """

    horizon: int
    mu: float
    rows: list[np.ndarray]
    stop: list[np.ndarray]

    def f(self, a: int, b: int) -> float:
        return float(self.rows[a + b][a])

    @property
    def value(self) -> float:
        return float(self.rows[0][0])

    def stopping_policy(self) -> QPolicy:
        return QPolicy.compact(self.horizon, [s.astype(np.float64) for s in self.stop[1:]])


def dp_value(mu: float, T: int) -> tuple[float, DpTable]:
    """Minimal expected stopped empirical mean; O(T^2) time and memory."""
    if not 0.0 <= mu <= 1.0:
        raise ValueError(f"mu must lie in [0, 1], got {mu}")
    if T < 1:
        raise ValueError("horizon must be at least 1")
    rows: list[np.ndarray] = [np.empty(0)] * (T + 1)
    stop: list[np.ndarray] = [np.empty(0, dtype=bool)] * (T + 1)
    rows[T] = np.arange(T + 1) / T
    stop[T] = np.ones(T + 1, dtype=bool)
    for t in range(T - 1, 0, -1):
        below = rows[t + 1]
        stay = np.arange(t + 1) / t
        go = mu * below[1:] + (1.0 - mu) * below[:-1]
        stop[t] = stay < go
        rows[t] = np.minimum(stay, go)
    rows[0] = np.array([mu * rows[1][1] + (1.0 - mu) * rows[1][0]])
    stop[0] = np.zeros(1, dtype=bool)
    table = DpTable(T, float(mu), rows, stop)
    return table.value, table


@dataclass
class QPolicy:
    """Stop probabilities ``q(s)`` for prefixes of length ``1..T``.

    ``levels[t - 1]`` holds the probabilities for prefixes of length ``t``:

    * ``"string"``: ``2**t`` entries; prefix ``s`` maps to the integer whose
      binary digits are ``s`` (first symbol most significant), so appending a
      symbol ``x`` sends index ``i`` to ``2 * i + x``.
    * ``"compact"``: ``t + 1`` entries indexed by the number of ones.
    """

    horizon: int
    levels: list[np.ndarray]
    form: str

    def __post_init__(self) -> None:
        if self.form not in ("string", "compact"):
            raise ValueError(f"unknown QPolicy form {self.form!r}")
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if len(self.levels) != self.horizon:
            raise ValueError(f"expected {self.horizon} levels of stop probabilities, got {len(self.levels)}")
        for t, level in enumerate(self.levels, start=1):
            want = 2**t if self.form == "string" else t + 1
            if level.shape != (want,):
                raise ValueError(f"level {t} has shape {level.shape}, expected ({want},)")
            if np.isnan(level).any() or (level < 0).any() or (level > 1).any():
                raise ValueError(f"level {t} has stop probabilities outside [0, 1]")
        if not np.all(self.levels[-1] == 1.0):
            raise ValueError("stop probability must be 1 on full-length prefixes")

    @classmethod
    def string(cls, horizon: int, levels: Sequence[Sequence[float]]) -> QPolicy:
        return cls(horizon, [np.asarray(level, dtype=np.float64) for level in levels], "string")

    @classmethod
    def compact(cls, horizon: int, levels: Sequence[Sequence[float]]) -> QPolicy:
        return cls(horizon, [np.asarray(level, dtype=np.float64) for level in levels], "compact")

    @classmethod
    def random(cls, horizon: int, rng: np.random.Generator, *, form: str = "string") -> QPolicy:
        """Stop probabilities drawn uniformly, with a mix of hard 0/1 decisions."""
        levels = []
        for t in range(1, horizon + 1):
            size = 2**t if form == "string" else t + 1
            q = rng.random(size)
            hard = rng.random(size) < 0.3
            q[hard] = np.round(q[hard])
            levels.append(np.ones(size) if t == horizon else q)
        return cls(horizon, levels, form)

    def to_string_form(self) -> QPolicy:
        if self.form == "string":
            return self
        levels = [level[_ones_count(t)] for t, level in enumerate(self.levels, start=1)]
        return QPolicy(self.horizon, levels, "string")


def _ones_count(t: int) -> np.ndarray:
    idx = np.arange(2**t, dtype=np.uint64)
    count = np.zeros(2**t, dtype=np.int64)
    for bit in range(t):
        count += ((idx >> np.uint64(bit)) & np.uint64(1)).astype(np.int64)
    return count


def emp_value(q: QPolicy, mu: float, T: int | None = None, *, allow_large: bool = False) -> float:
    """Expected stopped empirical mean under stopping rule ``q``.

    String-form policies enumerate all ``2**(T+1)`` prefixes and are capped at
    ``T = 16`` unless ``allow_large`` is set.
    """
    if T is not None and T != q.horizon:
        raise ValueError(f"T={T} does not match the policy horizon {q.horizon}")
    if not 0.0 <= mu <= 1.0:
        raise ValueError(f"mu must lie in [0, 1], got {mu}")
    T = q.horizon
    if q.form == "string":
        if T > STRING_HORIZON_CAP and not allow_large:
            raise ValueError(f"string-indexed enumeration is capped at T={STRING_HORIZON_CAP}; pass allow_large=True")
        g = _ones_count(T) / T
        for t in range(T - 1, 0, -1):
            stop = q.levels[t - 1]
            go = mu * g[1::2] + (1.0 - mu) * g[0::2]
            g = stop * (_ones_count(t) / t) + (1.0 - stop) * go
        return float(mu * g[1] + (1.0 - mu) * g[0])

    if T > COMPACT_HORIZON_CAP and not allow_large:
        raise ValueError(f"compact enumeration is capped at T={COMPACT_HORIZON_CAP}; pass allow_large=True")
    g = np.arange(T + 1) / T
    for t in range(T - 1, 0, -1):
        stop = q.levels[t - 1]
        go = mu * g[1:] + (1.0 - mu) * g[:-1]
        g = stop * (np.arange(t + 1) / t) + (1.0 - stop) * go
    return float(mu * g[1] + (1.0 - mu) * g[0])


@dataclass(frozen=True)
class LbCurve:
    """Reference curve ``sum_i gap_i * ln T / KL(mu_i, mu_best)`` over suboptimal arms."""

    arms: tuple[int, ...]
    coefficients: np.ndarray
    horizons: np.ndarray
    values: np.ndarray

    @property
    def slope(self) -> float:
        """Value per unit of ``ln T``."""
        return float(self.coefficients.sum())


def compensation_lb_curve(instance: BanditInstance, horizons: Sequence[float]) -> LbCurve:
    if not all(isinstance(arm, Bernoulli) for arm in instance.arms):
        raise ValueError("the lower-bound curve is defined for Bernoulli arms only")
    means = instance.means
    best = means.max()
    if np.count_nonzero(means == best) > 1:
        raise ValueError("the lower-bound curve needs a unique best arm")
    arms = tuple(int(i) for i in np.flatnonzero(means < best))
    coefficients = np.array([(best - means[i]) / bernoulli_kl(float(means[i]), float(best)) for i in arms])
    horizons = np.asarray(horizons, dtype=np.float64)
    if (horizons < 1).any():
        raise ValueError("horizons must be >= 1")
    return LbCurve(arms, coefficients, horizons, coefficients.sum() * np.log(horizons))
