"""Command-line entry point: ``kcmab simulate | lower-bound | presets``."""

from __future__ import annotations

import argparse
import io
import math
import sys
from pathlib import Path

import numpy as np

from .core import BanditInstance
from .harness import (
    PRESETS,
    BENCHMARK_MEANS,
    ConfigError,
    make_config,
    parse_config_text,
    run_experiment,
)
from .lower_bound import compensation_lb_curve, dp_value
from .policies import epsilon_from_constant

FLOOR_TOL = 1e-12


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(",", " ").split()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kcmab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run replicated episodes and write aggregated curves as CSV")
    sim.add_argument("--config", type=Path, help="flat key = value config file")
    sim.add_argument("--preset", choices=sorted(PRESETS))
    sim.add_argument("--means", type=_floats, help="arm means, comma separated")
    sim.add_argument("--law", help="reward law: bernoulli or three-point")
    sim.add_argument("--T", type=int)
    sim.add_argument("--reps", type=int)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--thin", type=int)
    sim.add_argument("--policy", action="append", help="ucb, eps-greedy, mod-ts, classic-ts or greedy (repeatable)")
    sim.add_argument("--epsilon", type=float, action="append", help="eps-greedy exploration constant (repeatable)")
    sim.add_argument("--eps-c", type=float, action="append", help="set epsilon to c * N / gap2^2 (repeatable)")
    sim.add_argument("--workers", type=int, help="worker processes (default: $KCMAB_WORKERS or CPU count)")
    sim.add_argument("--out", type=Path, help="output CSV path (default: stdout)")

    lb = sub.add_parser("lower-bound", help="DP stopping values, their floors and the log-T reference curve")
    lb.add_argument("--mu", type=float, action="append", help="best-arm mean for the DP scan (repeatable)")
    lb.add_argument("--T-max", type=int, default=500, help="scan DP(mu, T) for T = 1..T-max")
    lb.add_argument("--means", type=_floats, help="instance for the reference curve (default: nine-arm benchmark)")
    lb.add_argument("--horizons", type=_floats, help="horizons for the reference curve")
    lb.add_argument("--out", type=Path)

    sub.add_parser("presets", help="list the built-in experiment presets")
    return parser


def _simulate(args) -> int:
    settings: dict[str, object] = {}
    if args.config:
        settings.update(parse_config_text(args.config.read_text()))
    if args.preset:
        settings["preset"] = args.preset
    for key in ("means", "law", "T", "reps", "seed", "thin"):
        value = getattr(args, key)
        if value is not None:
            settings[key] = tuple(value) if key == "means" else value
    if args.policy:
        settings["policy"] = args.policy
    epsilons = list(args.epsilon or [])
    if args.eps_c:
        means = settings.get("means") or BENCHMARK_MEANS
        instance = BanditInstance.from_means(means)  # type: ignore[arg-type]
        epsilons += [epsilon_from_constant(c, instance) for c in args.eps_c]
    if epsilons:
        settings["epsilon"] = epsilons
    config = make_config(settings)
    result = run_experiment(config, workers=args.workers)
    if args.out:
        result.write_csv(args.out)
    else:
        sys.stdout.write(result.to_csv())
    return 0


def lower_bound_report(mus, t_max: int, means, horizons) -> str:
    if t_max < 1:
        raise ConfigError("T-max: must be >= 1")
    buf = io.StringIO()
    buf.write("# dp: reference mu/2; dp_floor: reference mu - 1.5*sqrt(mu*(1-mu)); lb_curve: mu is the best mean\n")
    buf.write("quantity,mu,T,value,reference,holds\n")
    for mu in mus:
        floor = mu - 1.5 * math.sqrt(mu * (1.0 - mu))
        for T in range(1, t_max + 1):
            value, _ = dp_value(mu, T)
            buf.write(f"dp,{mu:g},{T},{value:.9g},{mu / 2:.9g},{int(value >= mu / 2)}\n")
            buf.write(f"dp_floor,{mu:g},{T},{value:.9g},{floor:.9g},{int(value >= floor - FLOOR_TOL)}\n")
    instance = BanditInstance.from_means(means)
    curve = compensation_lb_curve(instance, horizons)
    for T, value in zip(curve.horizons, curve.values):
        buf.write(f"lb_curve,{instance.best_mean:g},{T:g},{value:.9g},,\n")
    return buf.getvalue()


def _lower_bound(args) -> int:
    mus = args.mu or [0.9, 0.95, 0.99]
    horizons = args.horizons or list(np.arange(1000, 10001, 1000))
    text = lower_bound_report(mus, args.T_max, args.means or BENCHMARK_MEANS, horizons)
    if args.out:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _presets() -> int:
    for name, policies in PRESETS.items():
        print(f"{name}: {', '.join(p.label for p in policies)} (T=10000, reps=1000)")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            return _simulate(args)
        if args.command == "lower-bound":
            return _lower_bound(args)
        return _presets()
    except (ConfigError, ValueError, OSError) as exc:
        print(f"kcmab: error: {exc}", file=sys.stderr)
        return 2
