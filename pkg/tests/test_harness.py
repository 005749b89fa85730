import math

import numpy as np
import pytest

from kcmab.cli import lower_bound_report, main
from kcmab.core import benchmark_instance
from kcmab.harness import (
    CSV_HEADER,
    ConfigError,
    ExperimentConfig,
    PRESETS,
    default_workers,
    make_config,
    parse_config_text,
    preset,
    replicate,
    run_experiment,
)
from kcmab.metrics import metric_names, trace_metrics
from kcmab.policies import PolicySpec, run_episode


def small(**overrides):
    base = dict(T=205, reps=6, seed=3, thin=10, policies=(PolicySpec("ucb"), PolicySpec("mod-ts")))
    base.update(overrides)
    return ExperimentConfig(**base)


def test_presets():
    assert len(preset("figure1").policies) == 3
    assert [p.epsilon for p in preset("figure3").policies] == [10, 15, 20]
    assert {p.kind for p in preset("figure2").policies} == {"classic-ts", "mod-ts"}
    for name in PRESETS:
        cfg = preset(name)
        assert (cfg.T, cfg.reps) == (10000, 1000)
        assert cfg.means == pytest.approx([0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1])
    with pytest.raises(ConfigError, match="figure1"):
        preset("figure9")


def test_row_count_and_header():
    cfg = small()
    result = run_experiment(cfg, workers=1)
    assert len(result.rows) == 2 * len(metric_names(9)) * math.ceil(205 / 10)
    lines = result.to_csv().splitlines()
    assert CSV_HEADER in lines
    body = lines[lines.index(CSV_HEADER) + 1 :]
    assert len(body) == len(result.rows)
    assert all(line.startswith("#") for line in lines[: lines.index(CSV_HEADER)])
    assert result.final("ucb", "pseudo_regret").t == 205


def test_single_replication_has_zero_stderr():
    result = run_experiment(small(reps=1), workers=1)
    assert all(r.stderr == 0 for r in result.rows)


def test_reruns_are_byte_identical(tmp_path):
    a = run_experiment(small(), workers=1).write_csv(tmp_path / "a.csv")
    b = run_experiment(small(), workers=2).write_csv(tmp_path / "b.csv")
    assert a.read_bytes() == b.read_bytes()


def test_replication_reproduces_in_isolation():
    cfg = small()
    result = run_experiment(cfg, workers=1)
    inst = benchmark_instance()
    alone = trace_metrics(run_episode(PolicySpec("mod-ts"), inst, cfg.T, cfg.seed, 4), inst, cfg.thin)
    assert np.array_equal(result.samples["mod-ts"][4], alone)
    assert np.array_equal(replicate(cfg, PolicySpec("mod-ts"), [4])[0], alone)


def test_means_are_averages_of_replications():
    cfg = small(reps=4)
    result = run_experiment(cfg, workers=1)
    finals = [
        trace_metrics(run_episode(PolicySpec("ucb"), benchmark_instance(), cfg.T, cfg.seed, r), benchmark_instance(), 1)[0, -1]
        for r in range(4)
    ]
    assert result.final("ucb", "pseudo_regret").mean == pytest.approx(np.mean(finals), rel=1e-12)


@pytest.mark.parametrize(
    "overrides, field",
    [
        (dict(T=5), "T"),
        (dict(reps=0), "reps"),
        (dict(thin=0), "thin"),
        (dict(policies=()), "policy"),
        (dict(law="gaussian"), "law"),
        (dict(means=(0.5, 1.5)), "means"),
        (dict(policies=(PolicySpec("ucb"), PolicySpec("ucb"))), "policy"),
    ],
)
def test_invalid_config_names_field(overrides, field):
    with pytest.raises(ConfigError, match=field):
        small(**overrides).validate()


def test_config_text_round_trip():
    text = """
    # nine arms, quick run
    preset = figure3
    T = 500
    reps = 3     # few
    epsilon = 5, 7
    """
    cfg = make_config(parse_config_text(text))
    assert cfg.T == 500 and cfg.reps == 3
    assert [p.epsilon for p in cfg.policies] == [5, 7]
    with pytest.raises(ConfigError):
        parse_config_text("T: 5")
    with pytest.raises(ConfigError):
        parse_config_text("horizon = 5")
    with pytest.raises(ConfigError, match="T"):
        parse_config_text("T = many")
    with pytest.raises(ConfigError, match="epsilon"):
        make_config({"policy": ["ucb"], "epsilon": [3.0]})


def test_workers_env(monkeypatch):
    monkeypatch.setenv("KCMAB_WORKERS", "3")
    assert default_workers() == 3
    monkeypatch.setenv("KCMAB_WORKERS", "zero")
    with pytest.raises(ConfigError):
        default_workers()


def test_cli_simulate_writes_csv(tmp_path, capsys):
    out = tmp_path / "run.csv"
    code = main(["simulate", "--policy", "greedy", "--policy", "eps-greedy", "--epsilon", "10", "--epsilon", "20",
                 "--T", "50", "--reps", "2", "--thin", "25", "--out", str(out)])
    assert code == 0
    text = out.read_text()
    assert "# law: bernoulli" in text and "# init_compensation" in text
    assert text.count("\n") - text.count("#") == 1 + 3 * 12 * 2


def test_cli_config_file_and_overrides(tmp_path, capsys):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("means = 0.7, 0.2\npolicy = ucb\nT = 30\nreps = 2\nthin = 30\n")
    assert main(["simulate", "--config", str(cfg), "--seed", "9"]) == 0
    out = capsys.readouterr().out
    assert "# seed: 9" in out and "ucb,compensation_arm1,30," in out


def test_cli_eps_constant(capsys):
    assert main(["simulate", "--means", "0.9,0.8", "--policy", "eps-greedy", "--eps-c", "0.01",
                 "--T", "20", "--reps", "1", "--thin", "20"]) == 0
    assert "eps-greedy[eps=2]" in capsys.readouterr().out


def test_cli_errors_leave_no_file(tmp_path, capsys):
    out = tmp_path / "bad.csv"
    assert main(["simulate", "--preset", "figure1", "--T", "3", "--out", str(out)]) != 0
    assert "T:" in capsys.readouterr().err
    assert not out.exists()
    assert main(["simulate", "--policy", "softmax", "--out", str(out)]) != 0
    assert not out.exists()


def test_cli_presets(capsys):
    assert main(["presets"]) == 0
    assert "figure2: classic-ts, mod-ts" in capsys.readouterr().out


def test_lower_bound_report():
    text = lower_bound_report([0.9], 3, [0.9, 0.1], [math.e, 100])
    lines = text.splitlines()
    assert lines[1] == "quantity,mu,T,value,reference,holds"
    assert "dp,0.9,2,0.855,0.45,1" in lines
    lb = [line for line in lines if line.startswith("lb_curve")]
    assert len(lb) == 2 and lb[0].startswith("lb_curve,0.9,2.71828,0.455119613")


def test_cli_lower_bound(tmp_path):
    out = tmp_path / "lb.csv"
    assert main(["lower-bound", "--mu", "0.95", "--T-max", "20", "--out", str(out)]) == 0
    rows = [line.split(",") for line in out.read_text().splitlines()[2:]]
    assert sum(r[0] == "dp" for r in rows) == 20
    assert all(r[5] == "1" for r in rows if r[0] in ("dp", "dp_floor"))
    assert sum(r[0] == "lb_curve" for r in rows) == 10
