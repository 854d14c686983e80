import json
from importlib import resources

import numpy as np
import pytest
import yaml

from perfpred.bench import (AlgorithmSpec, ExperimentConfig, bootstrap_ci,
                            default_checkpoints, load_config, run_experiment)
from perfpred.cli import main
from perfpred.errors import ConfigurationError


def tiny_config(out_dir, trials=2, jobs=1, seed=7):
    return ExperimentConfig(
        scenario_id="quadratic",
        scenario_params={"gamma": 2.0, "beta": 1.0, "eps": 0.5},
        algorithms=[AlgorithmSpec("greedy_sgd"), AlgorithmSpec("two_stage")],
        checkpoints=[100, 400],
        trials=trials,
        seed=seed,
        eval_samples=200,
        jobs=jobs,
        out_dir=str(out_dir),
    )


# ---------------------------------------------------------------------------
# bootstrap
# ---------------------------------------------------------------------------

def test_bootstrap_constant_values_collapse():
    assert bootstrap_ci([3.5] * 10, seed=0) == (3.5, 3.5)


def test_bootstrap_interval_contains_central_value():
    low, high = bootstrap_ci(np.arange(101.0), seed=1)
    assert low <= 50.0 <= high


def test_bootstrap_widening_level_never_shrinks_interval():
    values = np.random.default_rng(2).normal(size=40)
    low95, high95 = bootstrap_ci(values, level=0.95, seed=3)
    low99, high99 = bootstrap_ci(values, level=0.99, seed=3)
    assert low99 <= low95 and high99 >= high95


def test_bootstrap_requires_two_values():
    with pytest.raises(ConfigurationError):
        bootstrap_ci([1.0])


# ---------------------------------------------------------------------------
# experiment runner
# ---------------------------------------------------------------------------

def test_run_writes_expected_rows_and_exact_metric(tmp_path):
    config = tiny_config(tmp_path / "out", trials=1)
    csv_path, json_path = run_experiment(config)
    lines = open(csv_path, encoding="utf-8").read().splitlines()
    assert lines[0] == "algorithm,trial,seed,samples,theta_norm,metric_name,metric_value,flag"
    assert len(lines) == 1 + 2 * 1 * 2  # header + algos x trials x checkpoints
    # point-mass map: the suboptimality metric is exact, PR = 0.5 ||theta||^2
    for line in lines[1:]:
        cells = line.split(",")
        theta_norm, value = float(cells[4]), float(cells[6])
        assert value == pytest.approx(0.5 * theta_norm ** 2, rel=1e-9, abs=1e-12)


def test_run_is_byte_identical_across_repeats_and_job_counts(tmp_path):
    paths = []
    for name, jobs in (("a", 1), ("b", 1), ("c", 2)):
        csv_path, json_path = run_experiment(tiny_config(tmp_path / name, jobs=jobs))
        paths.append((csv_path, json_path))
    ref_csv = open(paths[0][0], "rb").read()
    ref_json = open(paths[0][1], "rb").read()
    assert ref_csv == open(paths[1][0], "rb").read() == open(paths[2][0], "rb").read()
    assert ref_json == open(paths[1][1], "rb").read() == open(paths[2][1], "rb").read()


def test_aggregate_json_validates_against_published_schema(tmp_path):
    jsonschema = pytest.importorskip("jsonschema")
    _, json_path = run_experiment(tiny_config(tmp_path / "out"))
    aggregate = json.load(open(json_path, encoding="utf-8"))
    schema = json.loads(resources.files("perfpred.schemas")
                        .joinpath("aggregate.schema.json").read_text())
    jsonschema.validate(aggregate, schema)
    for cell in aggregate["cells"]:
        assert cell["ci_low"] <= cell["median"] <= cell["ci_high"]


def test_failed_trials_are_flagged_and_run_continues(tmp_path):
    config = ExperimentConfig(
        scenario_id="quadratic",
        scenario_params={},
        algorithms=[AlgorithmSpec("dfo", {"delta": 50.0}),  # delta > radius: fails
                    AlgorithmSpec("greedy_sgd")],
        checkpoints=[100],
        trials=2, seed=0, eval_samples=100, jobs=1,
        out_dir=str(tmp_path / "out"),
    )
    csv_path, json_path = run_experiment(config)
    lines = open(csv_path, encoding="utf-8").read().splitlines()[1:]
    dfo_rows = [l for l in lines if l.startswith("dfo")]
    sgd_rows = [l for l in lines if l.startswith("greedy_sgd")]
    assert len(dfo_rows) == 2 and len(sgd_rows) == 2
    for row in dfo_rows:
        cells = row.split(",")
        assert cells[6] == "" and cells[7].startswith("error:")
    aggregate = json.load(open(json_path, encoding="utf-8"))
    dfo_cell = next(c for c in aggregate["cells"] if c["algorithm"] == "dfo")
    assert dfo_cell["n"] == 0 and dfo_cell["n_failed"] == 2
    assert dfo_cell["median"] is None


def test_config_validation():
    with pytest.raises(ConfigurationError):
        tiny_config("x", trials=0)
    with pytest.raises(ConfigurationError):
        ExperimentConfig("quadratic", {}, [AlgorithmSpec("nope")], [100])
    with pytest.raises(ConfigurationError):
        ExperimentConfig("quadratic", {}, [AlgorithmSpec("dfo")], [100, 100])
    with pytest.raises(ConfigurationError):
        ExperimentConfig("missing", {}, [AlgorithmSpec("dfo")], [100])


def test_default_checkpoints_are_log_spaced_and_increasing():
    grid = default_checkpoints()
    assert grid[0] == 100 and grid[-1] == 1_000_000
    assert all(b > a for a, b in zip(grid, grid[1:]))


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

def write_config(tmp_path, **overrides):
    payload = {
        "scenario": {"id": "quadratic", "params": {"eps": 0.5}},
        "algorithms": [{"name": "greedy_sgd"}],
        "checkpoints": [100],
        "trials": 2,
        "seed": 3,
        "eval_samples": 100,
        "out": str(tmp_path / "results"),
    }
    payload.update(overrides)
    path = tmp_path / "config.yaml"
    path.write_text(yaml.safe_dump(payload), encoding="utf-8")
    return path


def test_cli_run_and_reproducibility(tmp_path, capsys):
    config_path = write_config(tmp_path)
    assert main(["run", "--config", str(config_path)]) == 0
    first = open(tmp_path / "results" / "results.csv", "rb").read()
    assert main(["run", "--config", str(config_path),
                 "--out", str(tmp_path / "again")]) == 0
    assert first == open(tmp_path / "again" / "results.csv", "rb").read()
    out = capsys.readouterr().out
    assert "results.csv" in out and "aggregate.json" in out


def test_cli_jobs_env_override_keeps_output_identical(tmp_path, monkeypatch):
    config_path = write_config(tmp_path)
    assert main(["run", "--config", str(config_path)]) == 0
    baseline = open(tmp_path / "results" / "results.csv", "rb").read()
    monkeypatch.setenv("PERFPRED_JOBS", "2")
    assert main(["run", "--config", str(config_path),
                 "--out", str(tmp_path / "env")]) == 0
    assert baseline == open(tmp_path / "env" / "results.csv", "rb").read()


def test_cli_rejects_invalid_config(tmp_path, capsys):
    config_path = write_config(tmp_path, checkpoints=[100, 50])
    assert main(["run", "--config", str(config_path)]) == 2
    assert "error:" in capsys.readouterr().err
    assert main(["run", "--config", str(tmp_path / "absent.yaml")]) == 2


def test_cli_list_scenarios(capsys):
    assert main(["list-scenarios"]) == 0
    out = capsys.readouterr().out
    assert "quadratic" in out and "election_linreg" in out


def test_cli_certify_prints_certificate(capsys):
    assert main(["certify", "--scenario", "quadratic", "--param", "eps=0.5"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["lambda"] == 1.0
    assert payload["verdict"] == "strongly_convex"


def test_cli_dominance_probes(capsys):
    assert main(["dominance", "--scenario", "quadratic", "--probes", "5",
                 "--samples", "500"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert len(payload["probes"]) == 5
    assert payload["summary"]["yes"] == 5  # point masses + linear loss: exact
    assert sum(payload["summary"].values()) == 5


def test_cli_load_config_round_trip(tmp_path):
    config_path = write_config(tmp_path, trials=9, jobs=3)
    config = load_config(str(config_path))
    assert config.trials == 9 and config.jobs == 3
    assert config.scenario_params == {"eps": 0.5}
    assert config.budget == 100
