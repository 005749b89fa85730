"""Simulation toolkit for bandits where a controller pays myopic players to explore."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    BanditInstance,
    Bernoulli,
    DiscreteBounded,
    History,
    RngStream,
    UnobservedArmError,
    draw_reward,
    empirical_mean,
    benchmark_instance,
    update_history,
)
from .players import greedy_choice, min_compensation  # noqa: E402
from .policies import PolicySpec, run_episode  # noqa: E402

__all__ = [
    "BanditInstance",
    "Bernoulli",
    "DiscreteBounded",
    "History",
    "PolicySpec",
    "RngStream",
    "UnobservedArmError",
    "draw_reward",
    "empirical_mean",
    "greedy_choice",
    "min_compensation",
    "run_episode",
    "benchmark_instance",
    "update_history",
]
