"""Experiment configuration, replication orchestration and CSV output."""

from __future__ import annotations

import io
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .core import LAWS, BanditInstance, benchmark_instance
from .metrics import metric_names, summarize, thin_index, trace_metrics
from .policies import POLICY_KINDS, PolicySpec, run_episode

CSV_HEADER = "policy,metric,t,mean,stderr,n_reps"
WORKERS_ENV = "KCMAB_WORKERS"
BENCHMARK_MEANS = tuple(float(m) for m in benchmark_instance().means)


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the offending field."""


@dataclass(frozen=True)
class ExperimentConfig:
    means: tuple[float, ...] = BENCHMARK_MEANS
    law: str = "bernoulli"
    T: int = 10_000
    reps: int = 1000
    seed: int = 0
    policies: tuple[PolicySpec, ...] = ()
    thin: int = 10
    name: str = "custom"

    def validate(self) -> None:
        if len(self.means) < 2:
            raise ConfigError("means: need at least two arms")
        if any(not 0.0 <= m <= 1.0 for m in self.means):
            raise ConfigError("means: every mean must lie in [0, 1]")
        if self.law not in LAWS:
            raise ConfigError(f"law: unknown law {self.law!r}; choose from {', '.join(sorted(LAWS))}")
        if self.T < len(self.means):
            raise ConfigError(f"T: horizon {self.T} is shorter than the number of arms ({len(self.means)})")
        if self.reps < 1:
            raise ConfigError("reps: need at least one replication")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed: must be a 64-bit unsigned integer")
        if self.thin < 1:
            raise ConfigError("thin: stride must be >= 1")
        if not self.policies:
            raise ConfigError("policy: at least one policy is required")
        labels = [p.label for p in self.policies]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"policy: duplicate policies in {labels}")

    @property
    def instance(self) -> BanditInstance:
        return BanditInstance.from_means(self.means, self.law, name=self.name)

    def metadata(self) -> dict[str, str]:
        return {
            "kcmab_version": __version__,
            "config": self.name,
            "means": " ".join(f"{m:g}" for m in self.means),
            "law": self.law,
            "T": str(self.T),
            "reps": str(self.reps),
            "seed": str(self.seed),
            "stream_ids": f"0..{self.reps - 1}",
            "rng": "numpy SeedSequence([seed, stream_id]) -> PCG64 (environment, policy)",
            "thin": str(self.thin),
            "policies": " ".join(p.label for p in self.policies),
            "init_compensation": "0 (first N steps pull arms 0..N-1 unpaid)",
            "tie_break": "lowest index",
        }


PRESETS = {
    "figure1": (PolicySpec("ucb"), PolicySpec("eps-greedy", 20.0), PolicySpec("mod-ts")),
    "figure2": (PolicySpec("classic-ts"), PolicySpec("mod-ts")),
    "figure3": tuple(PolicySpec("eps-greedy", float(e)) for e in (10, 15, 20)),
}


def preset(name: str) -> ExperimentConfig:
    try:
        policies = PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; available presets: {', '.join(PRESETS)}") from None
    return ExperimentConfig(policies=policies, name=name)


def build_policies(kinds: Sequence[str], epsilons: Sequence[float]) -> tuple[PolicySpec, ...]:
    """Expand policy names; ``eps-greedy`` yields one policy per epsilon."""
    specs: list[PolicySpec] = []
    for kind in kinds:
        if kind not in POLICY_KINDS:
            raise ConfigError(f"policy: unknown policy {kind!r}; choose from {', '.join(POLICY_KINDS)}")
        if kind == "eps-greedy":
            if not epsilons:
                raise ConfigError("epsilon: eps-greedy needs at least one epsilon")
            for eps in epsilons:
                if not (eps > 0 and math.isfinite(eps)):
                    raise ConfigError(f"epsilon: must be a finite positive number, got {eps}")
                specs.append(PolicySpec(kind, float(eps)))
        else:
            specs.append(PolicySpec(kind))
    if epsilons and "eps-greedy" not in kinds:
        raise ConfigError("epsilon: given but no eps-greedy policy requested")
    return tuple(specs)


def _split_list(value: str) -> list[str]:
    return [item for item in value.replace(",", " ").split() if item]


def parse_config_text(text: str) -> dict[str, object]:
    """Parse a flat ``key = value`` file; ``#`` starts a comment.

    Keys: preset, means, law, T, reps, seed, thin, policy, epsilon, name.
    List values are separated by commas or whitespace.
    """
    parsed: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        try:
            if key in ("T", "reps", "seed", "thin"):
                parsed[key] = int(value)
            elif key == "means":
                parsed[key] = tuple(float(v) for v in _split_list(value))
            elif key == "epsilon":
                parsed[key] = [float(v) for v in _split_list(value)]
            elif key == "policy":
                parsed[key] = _split_list(value)
            elif key in ("preset", "law", "name"):
                parsed[key] = value
            else:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"{key}: cannot parse {value!r}") from None
    return parsed


def make_config(settings: dict[str, object]) -> ExperimentConfig:
    """Build a config from a preset (optional) plus field overrides."""
    settings = dict(settings)
    base = preset(str(settings.pop("preset"))) if settings.get("preset") else ExperimentConfig()
    kinds = settings.pop("policy", None)
    epsilons = settings.pop("epsilon", None)
    if kinds is not None:
        settings["policies"] = build_policies(list(kinds), list(epsilons or []))
    elif epsilons is not None:
        if base.policies and all(p.kind == "eps-greedy" for p in base.policies):
            settings["policies"] = build_policies(["eps-greedy"], list(epsilons))
        else:
            raise ConfigError("epsilon: given but no eps-greedy policy requested")
    unknown = set(settings) - {"means", "law", "T", "reps", "seed", "thin", "name", "policies"}
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    config = replace(base, **settings)
    config.validate()
    return config


@dataclass(frozen=True)
class ResultRow:
    policy: str
    metric: str
    t: int
    mean: float
    stderr: float
    n_reps: int

    def csv_line(self) -> str:
        return f"{self.policy},{self.metric},{self.t},{self.mean:.9g},{self.stderr:.9g},{self.n_reps}"


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    rows: list[ResultRow]
    # per-policy (reps, metrics, points) arrays, kept for acceptance checks
    samples: dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    def final(self, policy: str, metric: str) -> ResultRow:
        matches = [r for r in self.rows if r.policy == policy and r.metric == metric]
        if not matches:
            raise KeyError((policy, metric))
        return max(matches, key=lambda r: r.t)

    def at(self, policy: str, metric: str, t: int) -> ResultRow:
        for r in self.rows:
            if r.policy == policy and r.metric == metric and r.t == t:
                return r
        raise KeyError((policy, metric, t))

    def to_csv(self) -> str:
        buf = io.StringIO()
        for key, value in self.config.metadata().items():
            buf.write(f"# {key}: {value}\n")
        buf.write(CSV_HEADER + "\n")
        for row in self.rows:
            buf.write(row.csv_line() + "\n")
        return buf.getvalue()

    def write_csv(self, path: str | os.PathLike) -> Path:
        """Write atomically: the target only ever holds a complete file."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", newline="") as fh:
                fh.write(self.to_csv())
            os.replace(tmp, path)
        except BaseException:
            Path(tmp).unlink(missing_ok=True)
            raise
        return path


def replicate(config: ExperimentConfig, policy: PolicySpec, stream_ids: Iterable[int]) -> np.ndarray:
    """Thinned metric curves for the given replications, shape ``(reps, metrics, points)``."""
    instance = config.instance
    return np.stack(
        [trace_metrics(run_episode(policy, instance, config.T, config.seed, sid), instance, config.thin) for sid in stream_ids]
    )


def _replicate_job(args) -> np.ndarray:
    return replicate(*args)


def default_workers() -> int:
    value = os.environ.get(WORKERS_ENV)
    if value:
        try:
            workers = int(value)
        except ValueError:
            raise ConfigError(f"{WORKERS_ENV}: expected an integer, got {value!r}") from None
        if workers < 1:
            raise ConfigError(f"{WORKERS_ENV}: must be >= 1")
        return workers
    return max(1, min(os.cpu_count() or 1, 8))


def run_experiment(config: ExperimentConfig, workers: int | None = None) -> ExperimentResult:
    """Run every policy for ``config.reps`` replications and aggregate all metrics.

    Replication ``r`` uses stream id ``r``. Chunks may run in a process pool,
    but results are concatenated in stream-id order, so the output does not
    depend on scheduling.
    """
    config.validate()
    workers = default_workers() if workers is None else workers
    names = metric_names(len(config.means))
    t_values = thin_index(config.T, config.thin) + 1
    chunk = max(1, math.ceil(config.reps / (4 * workers)))
    chunks = [range(lo, min(lo + chunk, config.reps)) for lo in range(0, config.reps, chunk)]

    samples: dict[str, np.ndarray] = {}
    pool = ProcessPoolExecutor(workers) if workers > 1 and len(chunks) > 1 else None
    try:
        for policy in config.policies:
            jobs = [(config, policy, ids) for ids in chunks]
            parts = list(pool.map(_replicate_job, jobs)) if pool else [_replicate_job(job) for job in jobs]
            samples[policy.label] = np.concatenate(parts)
    finally:
        if pool:
            pool.shutdown()

    rows: list[ResultRow] = []
    for label, data in samples.items():
        for m, metric in enumerate(names):
            mean, stderr = summarize(data[:, m, :])
            rows.extend(
                ResultRow(label, metric, int(t), float(mu), float(se), config.reps)
                for t, mu, se in zip(t_values, mean, stderr)
            )
    return ExperimentResult(config, rows, samples)
