import itertools
import math
from fractions import Fraction
from functools import lru_cache

import mpmath
import numpy as np
import pytest

from kcmab.core import BanditInstance, DiscreteBounded
from kcmab.lower_bound import (
    InfiniteDivergenceError,
    QPolicy,
    bernoulli_kl,
    compensation_lb_curve,
    dp_value,
    emp_value,
)
from kcmab.core import benchmark_instance


# --- independent oracles ----------------------------------------------------


def kl_oracle(p, q):
    p, q = mpmath.mpf(p), mpmath.mpf(q)
    term = lambda x, y: mpmath.mpf(0) if x == 0 else x * mpmath.log(x / y)
    return float(term(p, q) + term(1 - p, 1 - q))


def dp_oracle(mu: Fraction, T: int) -> Fraction:
    """Exact optimal stopping value by recursion over explicit prefixes."""

    @lru_cache(maxsize=None)
    def value(s: str) -> Fraction:
        mean = Fraction(s.count("1"), len(s))
        if len(s) == T:
            return mean
        return min(mean, mu * value(s + "1") + (1 - mu) * value(s + "0"))

    return mu * value("1") + (1 - mu) * value("0")


def emp_oracle(q: QPolicy, mu: float) -> float:
    """Forward enumeration: sum over prefixes of P(reach and stop) * empirical mean."""
    q = q.to_string_form()
    total = 0.0
    for t in range(1, q.horizon + 1):
        for bits in itertools.product((0, 1), repeat=t):
            reach = 1.0
            for k in range(1, t + 1):
                reach *= mu if bits[k - 1] else 1 - mu
                if k < t:
                    reach *= 1 - q.levels[k - 1][int("".join(map(str, bits[:k])), 2)]
            total += reach * q.levels[t - 1][int("".join(map(str, bits)), 2)] * sum(bits) / t
    return total


# --- KL ---------------------------------------------------------------------


def test_kl_examples():
    assert bernoulli_kl(0.5, 0.5) == 0.0
    assert bernoulli_kl(0.0, 0.5) == pytest.approx(math.log(2), abs=1e-15)
    assert bernoulli_kl(0.1, 0.9) == pytest.approx(0.8 * math.log(9), abs=1e-14)
    assert bernoulli_kl(0.1, 0.9) == pytest.approx(1.757780, abs=1e-6)
    assert bernoulli_kl(1.0, 1.0) == 0.0


def test_kl_errors():
    with pytest.raises(InfiniteDivergenceError):
        bernoulli_kl(0.5, 1.0)
    with pytest.raises(InfiniteDivergenceError):
        bernoulli_kl(0.5, 0.0)
    with pytest.raises(ValueError):
        bernoulli_kl(1.5, 0.5)


def test_kl_matches_high_precision_and_pinsker_grid():
    grid = np.round(np.arange(1, 100) / 100, 2)
    for p in grid[::7]:
        for q in grid[::5]:
            assert bernoulli_kl(p, q) == pytest.approx(kl_oracle(p, q), rel=1e-12, abs=1e-15)
    for p in grid:
        for q in grid:
            kl = bernoulli_kl(p, q)
            assert kl >= 2 * (p - q) ** 2 - 1e-15
            assert (kl == 0) == (p == q)


# --- DP ---------------------------------------------------------------------


@pytest.mark.parametrize("mu", [0.0, 0.3, 0.9, 1.0])
def test_dp_horizon_one(mu):
    assert dp_value(mu, 1)[0] == mu


@pytest.mark.parametrize("mu", [0.2, 0.5, 0.9])
def test_dp_horizon_two(mu):
    assert dp_value(mu, 2)[0] == pytest.approx(mu * (1 + mu) / 2, abs=1e-15)


def test_dp_hand_value():
    assert dp_value(0.9, 2)[0] == pytest.approx(0.855, abs=1e-15)


@pytest.mark.parametrize("mu", ["1/10", "3/10", "1/2", "9/10", "99/100"])
@pytest.mark.parametrize("T", [1, 2, 3, 5, 8, 11])
def test_dp_matches_exact_string_oracle(mu, T):
    exact = dp_oracle(Fraction(mu), T)
    assert dp_value(float(Fraction(mu)), T)[0] == pytest.approx(float(exact), abs=1e-12)


def test_dp_errors():
    with pytest.raises(ValueError):
        dp_value(0.5, 0)
    with pytest.raises(ValueError):
        dp_value(1.1, 3)


@pytest.mark.parametrize("mu", [0.1, 0.45, 0.9, 0.99])
def test_dp_table_relations_exhaustive(mu):
    for T in (1, 2, 17, 200):
        value, table = dp_value(mu, T)
        for a in range(T + 1):
            assert table.f(a, T - a) == a / T
        for t in range(1, T):
            for a in range(t + 1):
                b = t - a
                expect = min(a / t, mu * table.f(a + 1, b) + (1 - mu) * table.f(a, b + 1))
                assert abs(table.f(a, b) - expect) <= 1e-12
                assert 0.0 <= table.f(a, b) <= 1.0
        assert value == pytest.approx(mu * table.f(1, 0) + (1 - mu) * table.f(0, 1), abs=1e-15)


@pytest.mark.parametrize("mu", [0.05, 0.3, 0.5, 0.8, 0.9, 0.97])
def test_dp_monotone_in_horizon_and_above_floor(mu):
    values = [dp_value(mu, T)[0] for T in range(1, 201)]
    assert all(later <= earlier + 1e-12 for earlier, later in zip(values, values[1:]))
    floor = mu - 1.5 * math.sqrt(mu * (1 - mu))
    assert min(values) >= floor - 1e-12


# --- emp --------------------------------------------------------------------


def test_emp_immediate_stop():
    levels = [np.ones(2)] + [np.ones(2**t) for t in range(2, 6)]
    assert emp_value(QPolicy.string(5, levels), 0.37) == pytest.approx(0.37, abs=1e-15)


def test_emp_never_stop_early():
    levels = [np.zeros(2**t) for t in range(1, 8)] + [np.ones(2**8)]
    assert emp_value(QPolicy.string(8, levels), 0.37, 8) == pytest.approx(0.37, abs=1e-14)


@pytest.mark.parametrize("seed", range(6))
def test_emp_matches_forward_enumeration(seed):
    rng = np.random.default_rng(seed)
    q = QPolicy.random(7, rng)
    mu = float(rng.random())
    assert emp_value(q, mu) == pytest.approx(emp_oracle(q, mu), abs=1e-12)


@pytest.mark.parametrize("seed", range(4))
def test_compact_emp_equals_its_string_expansion(seed):
    rng = np.random.default_rng(seed)
    q = QPolicy.random(9, rng, form="compact")
    assert emp_value(q, 0.6) == pytest.approx(emp_value(q.to_string_form(), 0.6), abs=1e-12)


@pytest.mark.parametrize("mu", [0.2, 0.6, 0.9])
def test_random_policies_never_beat_dp(mu):
    rng = np.random.default_rng(int(mu * 100))
    dp, table = dp_value(mu, 10)
    for _ in range(50):
        assert emp_value(QPolicy.random(10, rng), mu) >= dp - 1e-12
    greedy = table.stopping_policy()
    assert emp_value(greedy, mu) == pytest.approx(dp, abs=1e-12)
    assert emp_value(greedy.to_string_form(), mu) == pytest.approx(dp, abs=1e-12)


def test_qpolicy_validation_and_caps():
    with pytest.raises(ValueError):
        QPolicy.string(2, [np.ones(2)])
    with pytest.raises(ValueError):
        QPolicy.string(2, [np.ones(2), np.zeros(4)])
    with pytest.raises(ValueError):
        QPolicy.string(2, [np.ones(3), np.ones(4)])
    with pytest.raises(ValueError):
        QPolicy.string(1, [np.array([0.5, 1.5])])
    big = QPolicy.random(17, np.random.default_rng(0))
    with pytest.raises(ValueError):
        emp_value(big, 0.5)
    assert 0.0 <= emp_value(big, 0.5, allow_large=True) <= 1.0
    with pytest.raises(ValueError):
        emp_value(QPolicy.random(3, np.random.default_rng(0)), 0.5, T=4)


def test_dp_extracted_policy_at_large_horizon():
    dp, table = dp_value(0.9, 2000)
    assert emp_value(table.stopping_policy(), 0.9) == pytest.approx(dp, abs=1e-12)


# --- reference curve --------------------------------------------------------


def test_lb_curve_two_arms():
    inst = BanditInstance.from_means([0.9, 0.1])
    curve = compensation_lb_curve(inst, [math.e])
    assert curve.values[0] == pytest.approx(0.8 / (0.8 * math.log(9)), abs=1e-12)
    assert curve.values[0] == pytest.approx(0.455120, abs=1e-6)


def test_lb_curve_linear_in_log_horizon():
    curve = compensation_lb_curve(benchmark_instance(), [10, 100, 1000, 10000])
    ratios = curve.values / np.log(curve.horizons)
    np.testing.assert_allclose(ratios, curve.slope, rtol=1e-14)
    assert np.all(curve.coefficients > 0)
    assert curve.arms == tuple(range(1, 9))


def test_lb_curve_errors():
    with pytest.raises(ValueError):
        compensation_lb_curve(BanditInstance.from_means([0.5, 0.5]), [100])
    with pytest.raises(ValueError):
        compensation_lb_curve(BanditInstance((DiscreteBounded(((0.5, 1.0),)),) * 2), [100])
    with pytest.raises(ValueError):
        compensation_lb_curve(BanditInstance.from_means([0.9, 0.1]), [0.5])


def test_lb_curve_unsorted_instance():
    a = compensation_lb_curve(BanditInstance.from_means([0.1, 0.9, 0.5]), [1000])
    b = compensation_lb_curve(BanditInstance.from_means([0.9, 0.5, 0.1]), [1000])
    assert a.values[0] == pytest.approx(b.values[0], rel=1e-15)
