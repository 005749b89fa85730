"""Bandit instances, reward laws, pull histories and per-replication RNG streams.

Arms are indexed from 0. Time is 1-based: the first pull happens at ``t == 1``.

RNG contract
------------
Every replication owns an :class:`RngStream` ``(seed, stream_id)``. The pair is
fed to ``numpy.random.SeedSequence([seed, stream_id])`` whose two spawned
children drive two PCG64 generators:

* the *environment* generator, used only by :func:`draw_reward`, which consumes
  exactly one ``Generator.random()`` double per call;
* the *policy* generator, used for exploration coins, Beta samples and the
  Bernoulli rounding of rewards before posterior updates.

Both engines (the pure-Python reference and the compiled kernel) consume draws
in the same order, so a replication is reproducible bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

_U64 = 2**64
PROB_TOL = 1e-12


class UnobservedArmError(ValueError):
    """Raised when an empirical mean is requested for an arm never pulled."""


@dataclass(frozen=True)
class ArmDistribution:
    """Base class for reward laws supported on [0, 1]."""

    @property
    def kind(self) -> str:
        raise NotImplementedError

    def mean(self) -> float:
        raise NotImplementedError

    def sampling_table(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(values, thresholds)`` for inverse-CDF sampling.

        A uniform ``u`` maps to ``values[k]`` for the first ``k`` with
        ``u < thresholds[k]``. The last threshold is ``inf``.
        """
        raise NotImplementedError


@dataclass(frozen=True)
class Bernoulli(ArmDistribution):
    p: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"Bernoulli parameter must lie in [0, 1], got {self.p}")

    @property
    def kind(self) -> str:
        return "bernoulli"

    def mean(self) -> float:
        return float(self.p)

    def sampling_table(self) -> tuple[np.ndarray, np.ndarray]:
        return np.array([1.0, 0.0]), np.array([float(self.p), math.inf])


@dataclass(frozen=True)
class DiscreteBounded(ArmDistribution):
    """Finite-support law: ``support`` is a sequence of ``(value, probability)``."""

    support: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        support = tuple((float(v), float(p)) for v, p in self.support)
        if not support:
            raise ValueError("DiscreteBounded needs at least one support point")
        for v, p in support:
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"support value {v} outside [0, 1]")
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"probability {p} outside [0, 1]")
        total = math.fsum(p for _, p in support)
        if abs(total - 1.0) > PROB_TOL:
            raise ValueError(f"probabilities sum to {total!r}, expected 1")
        object.__setattr__(self, "support", support)

    @property
    def kind(self) -> str:
        return "discrete"

    def mean(self) -> float:
        return min(1.0, max(0.0, math.fsum(v * p for v, p in self.support)))

    def sampling_table(self) -> tuple[np.ndarray, np.ndarray]:
        kept = [(v, p) for v, p in self.support if p > 0.0]
        values = np.array([v for v, _ in kept])
        thresholds = np.cumsum([p for _, p in kept])
        thresholds[-1] = math.inf
        return values, thresholds


def three_point(mean: float) -> DiscreteBounded:
    """Law on ``{0, mean, 1}`` with the given mean and half the Bernoulli variance."""
    if not 0.0 <= mean <= 1.0:
        raise ValueError(f"mean must lie in [0, 1], got {mean}")
    return DiscreteBounded(((0.0, (1.0 - mean) / 2), (mean, 0.5), (1.0, mean / 2)))


LAWS = {"bernoulli": Bernoulli, "three-point": three_point}


@dataclass(frozen=True)
class BanditInstance:
    arms: tuple[ArmDistribution, ...]
    name: str = "instance"

    def __post_init__(self) -> None:
        object.__setattr__(self, "arms", tuple(self.arms))
        if len(self.arms) < 2:
            raise ValueError("a bandit instance needs at least two arms")

    @classmethod
    def from_means(cls, means: Sequence[float], law: str = "bernoulli", name: str = "instance") -> BanditInstance:
        try:
            make = LAWS[law]
        except KeyError:
            raise ValueError(f"unknown law {law!r}; choose from {sorted(LAWS)}") from None
        return cls(tuple(make(float(m)) for m in means), name=name)

    @property
    def n_arms(self) -> int:
        return len(self.arms)

    @property
    def means(self) -> np.ndarray:
        return np.array([arm.mean() for arm in self.arms])

    @property
    def best_arm(self) -> int:
        # np.argmax returns the lowest index among ties
        return int(np.argmax(self.means))

    @property
    def best_mean(self) -> float:
        return float(self.means.max())

    @property
    def gaps(self) -> np.ndarray:
        means = self.means
        return means.max() - means

    @property
    def law(self) -> str:
        kinds = {arm.kind for arm in self.arms}
        return kinds.pop() if len(kinds) == 1 else "mixed"

    def sampling_tables(self) -> tuple[np.ndarray, np.ndarray]:
        """Stack the per-arm sampling tables into padded ``(N, K)`` arrays."""
        tables = [arm.sampling_table() for arm in self.arms]
        width = max(len(v) for v, _ in tables)
        values = np.zeros((self.n_arms, width))
        thresholds = np.full((self.n_arms, width), math.inf)
        for i, (v, c) in enumerate(tables):
            values[i, : len(v)] = v
            thresholds[i, : len(c)] = c
        return values, thresholds


def benchmark_instance(law: str = "bernoulli") -> BanditInstance:
    """The nine-arm benchmark with means 0.9, 0.8, ..., 0.1."""
    return BanditInstance.from_means([round(0.9 - 0.1 * i, 1) for i in range(9)], law=law, name="nine-arm")


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream_id: int

    def __post_init__(self) -> None:
        for name in ("seed", "stream_id"):
            value = getattr(self, name)
            if not 0 <= int(value) < _U64:
                raise ValueError(f"{name} must be a 64-bit unsigned integer, got {value}")

    def generators(self) -> tuple[np.random.Generator, np.random.Generator]:
        """Fresh ``(environment, policy)`` generators positioned at the stream start."""
        env_seq, policy_seq = np.random.SeedSequence([int(self.seed), int(self.stream_id)]).spawn(2)
        return np.random.Generator(np.random.PCG64(env_seq)), np.random.Generator(np.random.PCG64(policy_seq))


def draw_reward(dist: ArmDistribution, rng: np.random.Generator) -> float:
    """Sample one reward; consumes exactly one ``rng.random()`` draw."""
    values, thresholds = dist.sampling_table()
    u = rng.random()
    for value, threshold in zip(values, thresholds):
        if u < threshold:
            return float(value)
    raise AssertionError("unreachable: last threshold is inf")


@dataclass
class History:
    """Pull counts ``N_i``, reward sums ``M_i`` and the next timestep ``t``."""

    pulls: np.ndarray
    reward_sums: np.ndarray
    t: int = 1

    @classmethod
    def empty(cls, n_arms: int) -> History:
        return cls(np.zeros(n_arms, dtype=np.int64), np.zeros(n_arms, dtype=np.float64), 1)

    @property
    def n_arms(self) -> int:
        return len(self.pulls)

    def copy(self) -> History:
        return History(self.pulls.copy(), self.reward_sums.copy(), self.t)

    def record(self, arm: int, reward: float) -> None:
        """In-place version of :func:`update_history`."""
        if not 0 <= arm < self.n_arms:
            raise IndexError(f"arm {arm} out of range for {self.n_arms} arms")
        if not 0.0 <= reward <= 1.0:
            raise ValueError(f"reward {reward} outside [0, 1]")
        self.pulls[arm] += 1
        self.reward_sums[arm] += reward
        self.t += 1

    def check(self) -> None:
        assert int(self.pulls.sum()) == self.t - 1, "pull counts do not sum to t - 1"
        assert np.all(self.reward_sums >= 0.0) and np.all(self.reward_sums <= self.pulls), "reward sums out of range"


def update_history(h: History, arm: int, reward: float) -> History:
    """Return a new history with one more observation of ``arm``."""
    out = h.copy()
    out.record(arm, reward)
    return out


def empirical_mean(h: History, arm: int) -> float:
    if not 0 <= arm < h.n_arms:
        raise IndexError(f"arm {arm} out of range for {h.n_arms} arms")
    n = int(h.pulls[arm])
    if n == 0:
        raise UnobservedArmError(f"arm {arm} has not been observed")
    return float(h.reward_sums[arm]) / n


def empirical_means(h: History) -> np.ndarray:
    """All empirical means; every arm must have been observed."""
    if np.any(h.pulls == 0):
        missing = np.flatnonzero(h.pulls == 0).tolist()
        raise UnobservedArmError(f"arms {missing} have not been observed")
    return h.reward_sums / h.pulls
