"""Compiled episode kernel.

Mirrors ``policies._run_reference`` draw for draw; ``tests/test_engines.py``
holds the two engines to bit-identical traces.
"""

from __future__ import annotations

import math

import numba
import numpy as np

from .core import BanditInstance, RngStream

UCB, EPS_GREEDY, MOD_TS, CLASSIC_TS, GREEDY = range(5)
KIND_CODES = {"ucb": UCB, "eps-greedy": EPS_GREEDY, "mod-ts": MOD_TS, "classic-ts": CLASSIC_TS, "greedy": GREEDY}

# Phase codes, kept in sync with policies.Phase
INIT, EXPLOIT, EXPLORE, EMPIRICAL, SAMPLE, GREEDY_PHASE = range(6)


@numba.njit(cache=True)
def _draw(values, thresholds, arm, env):
    u = env.random()
    k = 0
    while u >= thresholds[arm, k]:
        k += 1
    return values[arm, k]


@numba.njit(cache=True)
def _leader(sums, pulls):
    best = -math.inf
    best_i = 0
    for i in range(sums.shape[0]):
        m = sums[i] / pulls[i]
        if m > best:
            best = m
            best_i = i
    return best_i, best


@numba.njit(cache=True)
def _gap_to_leader(sums, pulls, arm):
    _, top = _leader(sums, pulls)
    return top - sums[arm] / pulls[arm]


@numba.njit(cache=True)
def _posterior_argmax(alpha, beta, rng):
    best = -math.inf
    best_i = 0
    for i in range(alpha.shape[0]):
        theta = rng.beta(alpha[i], beta[i])
        if theta > best:
            best = theta
            best_i = i
    return best_i


@numba.njit(cache=True)
def _episode(kind, epsilon, values, thresholds, T, env, rng):
    n = values.shape[0]
    arms = np.empty(T, np.int64)
    rewards = np.empty(T, np.float64)
    comps = np.zeros(T, np.float64)
    phases = np.empty(T, np.int8)
    pulls = np.zeros(n, np.int64)
    sums = np.zeros(n, np.float64)
    alpha = np.ones(n, np.float64)
    beta = np.ones(n, np.float64)
    posterior = kind == MOD_TS or kind == CLASSIC_TS
    pointer = 0

    i = 0
    for arm in range(n):
        x = _draw(values, thresholds, arm, env)
        pulls[arm] += 1
        sums[arm] += x
        if posterior:
            if rng.random() < x:
                alpha[arm] += 1.0
            else:
                beta[arm] += 1.0
        arms[i] = arm
        rewards[i] = x
        phases[i] = INIT
        i += 1

    while i < T:
        t = i + 1
        if kind == MOD_TS:
            chosen = 0
            if t + 1 <= T:
                # posterior samples come from the pre-round posterior
                chosen = _posterior_argmax(alpha, beta, rng)
            leader, _ = _leader(sums, pulls)
            x = _draw(values, thresholds, leader, env)
            pulls[leader] += 1
            sums[leader] += x
            if rng.random() < x:
                alpha[leader] += 1.0
            else:
                beta[leader] += 1.0
            arms[i] = leader
            rewards[i] = x
            phases[i] = EMPIRICAL
            i += 1
            if t + 1 > T:
                break
            pay = _gap_to_leader(sums, pulls, chosen)
            x = _draw(values, thresholds, chosen, env)
            pulls[chosen] += 1
            sums[chosen] += x
            if rng.random() < x:
                alpha[chosen] += 1.0
            else:
                beta[chosen] += 1.0
            arms[i] = chosen
            rewards[i] = x
            comps[i] = pay
            phases[i] = SAMPLE
            i += 1
            continue

        pay = 0.0
        if kind == UCB:
            best = -math.inf
            arm = 0
            for j in range(n):
                u = sums[j] / pulls[j] + math.sqrt(2.0 * math.log(t) / pulls[j])
                if u > best:
                    best = u
                    arm = j
            phase = EXPLORE
            pay = _gap_to_leader(sums, pulls, arm)
        elif kind == EPS_GREEDY:
            if rng.random() < min(1.0, epsilon / t):
                arm = pointer
                pointer = (pointer + 1) % n
                phase = EXPLORE
                pay = _gap_to_leader(sums, pulls, arm)
            else:
                arm, _ = _leader(sums, pulls)
                phase = EXPLOIT
        elif kind == CLASSIC_TS:
            arm = _posterior_argmax(alpha, beta, rng)
            phase = SAMPLE
            pay = _gap_to_leader(sums, pulls, arm)
        else:
            arm, _ = _leader(sums, pulls)
            phase = GREEDY_PHASE

        x = _draw(values, thresholds, arm, env)
        pulls[arm] += 1
        sums[arm] += x
        if posterior:
            if rng.random() < x:
                alpha[arm] += 1.0
            else:
                beta[arm] += 1.0
        arms[i] = arm
        rewards[i] = x
        comps[i] = pay
        phases[i] = phase
        i += 1

    return arms, rewards, comps, phases


def simulate(policy, instance: BanditInstance, T: int, stream: RngStream):
    values, thresholds = instance.sampling_tables()
    env, rng = stream.generators()
    epsilon = float(policy.epsilon) if policy.epsilon is not None else 0.0
    return _episode(KIND_CODES[policy.kind], epsilon, values, thresholds, T, env, rng)
