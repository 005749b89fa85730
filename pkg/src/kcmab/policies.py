"""Controller policies and the episode runner.

Five policies are available:

``ucb``
    Pull the arm with the largest optimistic index and pay the player the
    gap to the empirical leader.
``eps-greedy``
    With probability ``min(1, eps / t)`` explore the next arm of a fixed
    round-robin cycle (paying the gap), otherwise follow the empirical leader.
``mod-ts``
    Two-step rounds: an unpaid pull of the empirical leader, then a paid pull
    of the arm whose Beta posterior sample is largest.
``classic-ts``
    One posterior sample per step, pull its argmax and pay the gap.
``greedy``
    Never pay; players follow the empirical leader.

The first ``N`` steps pull every arm once, unpaid. Every argmax breaks ties
towards the lowest index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Callable, Iterator

import numpy as np

from .core import BanditInstance, History, RngStream, draw_reward, empirical_means
from .players import greedy_choice, min_compensation

POLICY_KINDS = ("ucb", "eps-greedy", "mod-ts", "classic-ts", "greedy")


class Phase(IntEnum):
    INIT = 0
    EXPLOIT = 1
    EXPLORE = 2
    EMPIRICAL = 3
    SAMPLE = 4
    GREEDY = 5


PAID_PHASES = frozenset({Phase.EXPLORE, Phase.SAMPLE})


@dataclass(frozen=True)
class PolicySpec:
    kind: str
    epsilon: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"unknown policy {self.kind!r}; choose from {', '.join(POLICY_KINDS)}")
        if self.kind == "eps-greedy":
            if self.epsilon is None or not self.epsilon > 0 or not math.isfinite(self.epsilon):
                raise ValueError(f"eps-greedy needs a finite epsilon > 0, got {self.epsilon}")
        elif self.epsilon is not None:
            raise ValueError(f"policy {self.kind!r} takes no epsilon")

    @property
    def label(self) -> str:
        if self.kind == "eps-greedy":
            return f"eps-greedy[eps={self.epsilon:g}]"
        return self.kind


def epsilon_from_constant(c: float, instance: BanditInstance) -> float:
    """Exploration constant ``c * N / gap2**2`` with ``gap2`` the smallest positive gap."""
    gaps = instance.gaps
    positive = gaps[gaps > 0]
    if positive.size == 0:
        raise ValueError("all arms share the best mean; no positive gap")
    if not c > 0:
        raise ValueError("c must be positive")
    return c * instance.n_arms / float(positive.min()) ** 2


# --- per-policy state -------------------------------------------------------


@dataclass
class EpsGreedyState:
    epsilon: float
    pointer: int = 0


@dataclass
class TsState:
    alpha: np.ndarray
    beta: np.ndarray
    mode: str = "modified"

    @classmethod
    def fresh(cls, n_arms: int, mode: str = "modified") -> TsState:
        return cls(np.ones(n_arms, dtype=np.int64), np.ones(n_arms, dtype=np.int64), mode)


# --- single-step operations -------------------------------------------------


def ucb_index(mean: float, n: int, t: float) -> float:
    if n < 1:
        raise ValueError("UCB index needs at least one observation")
    return mean + math.sqrt(2.0 * math.log(t) / n)


def _argmax(values) -> int:
    best, best_i = -math.inf, 0
    for i, v in enumerate(values):
        if v > best:
            best, best_i = v, i
    return best_i


def ucb_select(h: History, t: int) -> int:
    means = empirical_means(h)
    return _argmax(ucb_index(float(m), int(n), t) for m, n in zip(means, h.pulls))


def eps_explore_prob(epsilon: float, t: int) -> float:
    return min(1.0, epsilon / t)


def eps_greedy_step(state: EpsGreedyState, h: History, t: int, rng) -> tuple[int, Phase]:
    """Decide one modified epsilon-greedy step; consumes one ``rng.random()``."""
    means = empirical_means(h)
    if rng.random() < eps_explore_prob(state.epsilon, t):
        arm = state.pointer
        state.pointer = (state.pointer + 1) % h.n_arms
        return arm, Phase.EXPLORE
    return _argmax(means), Phase.EXPLOIT


def ts_update(alpha: int, beta: int, reward: float, rng) -> tuple[int, int]:
    """Bernoulli-round ``reward`` and fold it into Beta(alpha, beta).

    Always consumes one ``rng.random()``; rewards in {0, 1} round deterministically.
    """
    y = 1 if rng.random() < reward else 0
    return alpha + y, beta + 1 - y


def beta_sampler(state: TsState, rng) -> np.ndarray:
    """One posterior sample per arm, drawn in arm order."""
    return np.array([rng.beta(float(a), float(b)) for a, b in zip(state.alpha, state.beta)])


Sampler = Callable[[TsState, History, object], np.ndarray]


def _default_sampler(state: TsState, h: History, rng) -> np.ndarray:
    return beta_sampler(state, rng)


@dataclass(frozen=True)
class StepRecord:
    t: int
    arm: int
    reward: float
    compensation: float
    phase: Phase


def _pull(instance: BanditInstance, h: History, arm: int, env) -> float:
    reward = draw_reward(instance.arms[arm], env)
    h.record(arm, reward)
    return reward


def _observe_ts(state: TsState, arm: int, reward: float, rng) -> None:
    state.alpha[arm], state.beta[arm] = ts_update(int(state.alpha[arm]), int(state.beta[arm]), reward, rng)


def mod_ts_round(
    state: TsState,
    h: History,
    instance: BanditInstance,
    env,
    rng,
    sampler: Sampler = _default_sampler,
) -> tuple[StepRecord, StepRecord]:
    """Play one two-step round starting at ``h.t`` and return both step records.

    Posterior samples are taken before either pull of the round. The sample
    step pays the gap measured after the empirical step has been observed.
    """
    t = h.t
    theta = np.asarray(sampler(state, h, rng), dtype=np.float64)
    leader = _argmax(empirical_means(h))
    reward = _pull(instance, h, leader, env)
    _observe_ts(state, leader, reward, rng)
    first = StepRecord(t, leader, reward, 0.0, Phase.EMPIRICAL)

    chosen = _argmax(theta)
    pay = min_compensation(empirical_means(h), chosen)
    reward = _pull(instance, h, chosen, env)
    _observe_ts(state, chosen, reward, rng)
    return first, StepRecord(t + 1, chosen, reward, pay, Phase.SAMPLE)


def classic_ts_step(state: TsState, h: History, t: int, rng, sampler: Sampler = _default_sampler) -> int:
    """Arm chosen by one standard Thompson step (posterior update is the caller's)."""
    empirical_means(h)
    return _argmax(np.asarray(sampler(state, h, rng), dtype=np.float64))


# --- episodes ---------------------------------------------------------------


@dataclass
class EpisodeTrace:
    """Per-step log of one episode, stored column-wise."""

    instance_name: str
    n_arms: int
    policy: PolicySpec
    seed: int
    stream_id: int
    arms: np.ndarray
    rewards: np.ndarray
    compensations: np.ndarray
    phases: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def horizon(self) -> int:
        return len(self.arms)

    @property
    def steps(self) -> Iterator[StepRecord]:
        for i in range(self.horizon):
            yield StepRecord(i + 1, int(self.arms[i]), float(self.rewards[i]), float(self.compensations[i]), Phase(self.phases[i]))

    def pull_counts(self) -> np.ndarray:
        return np.bincount(self.arms, minlength=self.n_arms)

    def same_as(self, other: EpisodeTrace) -> bool:
        return (
            self.policy == other.policy
            and (self.seed, self.stream_id, self.n_arms) == (other.seed, other.stream_id, other.n_arms)
            and all(
                np.array_equal(getattr(self, name), getattr(other, name))
                for name in ("arms", "rewards", "compensations", "phases")
            )
        )


def _run_reference(policy: PolicySpec, instance: BanditInstance, T: int, stream: RngStream, sampler, debug: bool):
    env, rng = stream.generators()
    n = instance.n_arms
    h = History.empty(n)
    ts = TsState.fresh(n, "classic" if policy.kind == "classic-ts" else "modified")
    eps = EpsGreedyState(policy.epsilon) if policy.kind == "eps-greedy" else None
    uses_posterior = policy.kind in ("mod-ts", "classic-ts")
    records: list[StepRecord] = []

    def log(rec: StepRecord) -> None:
        records.append(rec)
        if debug:
            h.check()

    for arm in range(n):
        t = h.t
        reward = _pull(instance, h, arm, env)
        if uses_posterior:
            _observe_ts(ts, arm, reward, rng)
        log(StepRecord(t, arm, reward, 0.0, Phase.INIT))

    while h.t <= T:
        t = h.t
        if policy.kind == "mod-ts":
            if t + 1 <= T:
                first, second = mod_ts_round(ts, h, instance, env, rng, sampler)
                log(first)
                log(second)
            else:
                leader = _argmax(empirical_means(h))
                reward = _pull(instance, h, leader, env)
                _observe_ts(ts, leader, reward, rng)
                log(StepRecord(t, leader, reward, 0.0, Phase.EMPIRICAL))
            continue

        means = empirical_means(h)
        if policy.kind == "ucb":
            arm, phase = ucb_select(h, t), Phase.EXPLORE
        elif policy.kind == "eps-greedy":
            arm, phase = eps_greedy_step(eps, h, t, rng)
        elif policy.kind == "classic-ts":
            arm, phase = classic_ts_step(ts, h, t, rng, sampler), Phase.SAMPLE
        else:
            arm, phase = greedy_choice(means), Phase.GREEDY
        pay = min_compensation(means, arm) if phase in PAID_PHASES else 0.0
        reward = _pull(instance, h, arm, env)
        if uses_posterior:
            _observe_ts(ts, arm, reward, rng)
        log(StepRecord(t, arm, reward, pay, phase))

    return (
        np.array([r.arm for r in records], dtype=np.int64),
        np.array([r.reward for r in records]),
        np.array([r.compensation for r in records]),
        np.array([int(r.phase) for r in records], dtype=np.int8),
    )


def run_episode(
    policy: PolicySpec,
    instance: BanditInstance,
    T: int,
    seed: int,
    stream_id: int = 0,
    *,
    engine: str = "fast",
    sampler: Sampler | None = None,
    debug: bool = False,
) -> EpisodeTrace:
    """Simulate ``T`` steps of ``policy`` on ``instance``.

    ``engine="fast"`` runs the compiled kernel; ``engine="reference"`` runs the
    step functions of this module and accepts a patched posterior ``sampler``.
    Both consume identical random draws and return identical traces.

    UCB steps are tagged ``EXPLORE`` and classic Thompson steps ``SAMPLE``:
    both are the phases in which the controller pays the Fact-1 gap.
    """
    if T < instance.n_arms:
        raise ValueError(f"horizon T={T} is shorter than the {instance.n_arms}-step initialization")
    stream = RngStream(seed, stream_id)
    if sampler is not None and engine != "reference":
        raise ValueError("a patched sampler requires engine='reference'")
    if engine == "reference":
        columns = _run_reference(policy, instance, T, stream, sampler or _default_sampler, debug)
    elif engine == "fast":
        from ._kernel import simulate

        columns = simulate(policy, instance, T, stream)
    else:
        raise ValueError(f"unknown engine {engine!r}")
    return EpisodeTrace(instance.name, instance.n_arms, policy, seed, stream_id, *columns)
