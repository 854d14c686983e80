"""Experiment runner: scenario x algorithm x seed grids with bootstrap summaries.

Each (algorithm, trial) task is fully determined by seeds derived from the
master seed, so results are byte-identical at any worker count; rows are
buffered per task and written in task order. Anytime algorithms run once per
trial at the full budget and are read off at each checkpoint; the two-stage
procedure is not anytime, so it is re-run per checkpoint with that
checkpoint as its sample budget. Metric evaluation draws are charged to a
separate evaluation meter, never to the algorithm's budget.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import yaml

from .errors import ConfigurationError
from .maps import CountingMap
from .optim import RunRecord, dfo, greedy_sgd, lazy_sgd, rrm, two_stage
from .scenarios import SCENARIO_BUILDERS, Scenario, make_scenario
from .seeding import derive_seed

__all__ = [
    "AlgorithmSpec",
    "ExperimentConfig",
    "load_config",
    "bootstrap_ci",
    "run_trial",
    "run_experiment",
    "CSV_COLUMNS",
    "SCHEMA_VERSION",
]

CSV_COLUMNS = ["algorithm", "trial", "seed", "samples", "theta_norm",
               "metric_name", "metric_value", "flag"]
SCHEMA_VERSION = "perfpred-aggregate-v1"
ANYTIME_ALGORITHMS = ("dfo", "greedy_sgd", "lazy_sgd", "rrm")
KNOWN_ALGORITHMS = ANYTIME_ALGORITHMS + ("two_stage",)


@dataclass(frozen=True)
class AlgorithmSpec:
    name: str
    cfg: dict = field(default_factory=dict)


@dataclass
class ExperimentConfig:
    scenario_id: str
    scenario_params: dict
    algorithms: list[AlgorithmSpec]
    checkpoints: list[int]
    trials: int = 50
    seed: int = 0
    eval_samples: int = 10_000
    jobs: int = 1
    out_dir: str = "results"

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigurationError(f"trials must be >= 1, got {self.trials}")
        if not self.algorithms:
            raise ConfigurationError("at least one algorithm is required")
        for spec in self.algorithms:
            if spec.name not in KNOWN_ALGORITHMS:
                raise ConfigurationError(
                    f"unknown algorithm {spec.name!r}; known: {sorted(KNOWN_ALGORITHMS)}")
        if self.scenario_id not in SCENARIO_BUILDERS:
            raise ConfigurationError(
                f"unknown scenario {self.scenario_id!r}; known: {sorted(SCENARIO_BUILDERS)}")
        cps = list(self.checkpoints)
        if not cps or any(c < 2 for c in cps):
            raise ConfigurationError("checkpoints must be >= 2 samples each")
        if any(b <= a for a, b in zip(cps, cps[1:])):
            raise ConfigurationError(f"checkpoints must be strictly increasing, got {cps}")
        self.checkpoints = [int(c) for c in cps]
        if self.eval_samples < 1:
            raise ConfigurationError("eval_samples must be >= 1")
        if self.jobs < 1:
            raise ConfigurationError("jobs must be >= 1")

    @property
    def budget(self) -> int:
        return self.checkpoints[-1]


def default_checkpoints(low: int = 100, high: int = 1_000_000, per_decade: int = 2) -> list[int]:
    """Log-spaced sample checkpoints, 10^2 .. 10^6 by default."""
    lo, hi = np.log10(low), np.log10(high)
    n = int(round((hi - lo) * per_decade)) + 1
    grid = np.unique(np.round(np.logspace(lo, hi, n)).astype(int))
    return [int(g) for g in grid]


def load_config(path: str) -> ExperimentConfig:
    """Parse a YAML experiment file (see README for the grammar)."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigurationError(f"{path}: invalid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigurationError(f"{path}: top level must be a mapping")
    try:
        scenario = raw["scenario"]
        algorithms = raw["algorithms"]
    except KeyError as exc:
        raise ConfigurationError(f"{path}: missing required key {exc}") from exc
    if not isinstance(scenario, dict) or "id" not in scenario:
        raise ConfigurationError(f"{path}: scenario must be a mapping with an 'id'")
    specs = []
    for i, entry in enumerate(algorithms):
        if isinstance(entry, str):
            specs.append(AlgorithmSpec(entry))
        elif isinstance(entry, dict) and "name" in entry:
            specs.append(AlgorithmSpec(entry["name"], dict(entry.get("cfg") or {})))
        else:
            raise ConfigurationError(
                f"{path}: algorithms[{i}] must be a name or a mapping with 'name'")
    checkpoints = raw.get("checkpoints") or default_checkpoints()
    return ExperimentConfig(
        scenario_id=scenario["id"],
        scenario_params=dict(scenario.get("params") or {}),
        algorithms=specs,
        checkpoints=[int(c) for c in checkpoints],
        trials=int(raw.get("trials", 50)),
        seed=int(raw.get("seed", 0)),
        eval_samples=int(raw.get("eval_samples", 10_000)),
        jobs=int(raw.get("jobs", 1)),
        out_dir=str(raw.get("out", "results")),
    )


def bootstrap_ci(values, level: float = 0.95, resamples: int = 2000,
                 seed: int = 0) -> tuple[float, float]:
    """Percentile bootstrap interval for the median."""
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        raise ConfigurationError(f"bootstrap needs >= 2 values, got {values.size}")
    if not 0.0 < level < 1.0:
        raise ConfigurationError(f"level must lie in (0, 1), got {level}")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, values.size, size=(resamples, values.size))
    medians = np.median(values[idx], axis=1)
    tail = 0.5 * (1.0 - level)
    return (float(np.quantile(medians, tail)), float(np.quantile(medians, 1.0 - tail)))


# ---------------------------------------------------------------------------
# Single-trial execution
# ---------------------------------------------------------------------------

def _merged_cfg(scenario: Scenario, name: str, user_cfg: dict) -> dict:
    cfg = dict(scenario.algorithm_defaults.get(name, {}))
    cfg.update(user_cfg or {})
    return cfg


def _run_anytime(scenario: Scenario, name: str, cfg: dict, budget: int,
                 seed: int) -> RunRecord:
    counter = CountingMap(scenario.map)
    if name == "dfo":
        record = dfo(counter, scenario.loss, scenario.domain, budget, seed, cfg)
    elif name == "greedy_sgd":
        cfg = dict(cfg)
        cfg.setdefault("record_every", max(1, budget // 5000))
        record = greedy_sgd(counter, scenario.loss, scenario.domain, budget, seed, cfg)
    elif name == "lazy_sgd":
        record = lazy_sgd(counter, scenario.loss, scenario.domain, budget, seed, cfg)
    elif name == "rrm":
        cfg = dict(cfg)
        n_per_iter = int(cfg.pop("n_per_iter", 1000))
        theta0 = cfg.pop("theta0", None)
        iterations = max(1, budget // n_per_iter)
        record = rrm(counter, scenario.loss, scenario.domain, iterations,
                     n_per_iter, seed, theta0=theta0)
    else:
        raise ConfigurationError(f"unknown anytime algorithm {name!r}")
    if counter.count != record.samples_used or counter.count > budget:
        raise ConfigurationError(
            f"{name}: sample accounting mismatch (drawn={counter.count}, "
            f"recorded={record.samples_used}, budget={budget})")
    return record


def run_trial(scenario: Scenario, name: str, user_cfg: dict, trial: int,
              master_seed: int, checkpoints: list[int], eval_samples: int) -> list[dict]:
    """All CSV rows for one (algorithm, trial) cell."""
    cfg = _merged_cfg(scenario, name, user_cfg)
    seed = derive_seed(master_seed, scenario.scenario_id, name, "trial", trial)
    rows = []

    def evaluate(theta, checkpoint, flag=""):
        eval_seed = derive_seed(master_seed, "eval", name, trial, checkpoint)
        value = scenario.evaluate_metric(theta, eval_samples, eval_seed)
        rows.append({
            "algorithm": name, "trial": trial, "seed": seed,
            "samples": checkpoint,
            "theta_norm": float(np.linalg.norm(theta)),
            "metric_name": scenario.metric, "metric_value": value,
            "flag": flag,
        })

    def failure_rows(checkpoints_left, exc):
        for checkpoint in checkpoints_left:
            rows.append({
                "algorithm": name, "trial": trial, "seed": seed,
                "samples": checkpoint, "theta_norm": "",
                "metric_name": scenario.metric, "metric_value": "",
                "flag": f"error:{type(exc).__name__}",
            })

    if name == "two_stage":
        for checkpoint in checkpoints:
            try:
                counter = CountingMap(scenario.map)
                record = two_stage(counter, scenario.loss, scenario.domain,
                                   checkpoint // 2,
                                   derive_seed(seed, "budget", checkpoint))
                if counter.count > checkpoint:
                    raise ConfigurationError("two_stage overspent its budget")
                flag = ";".join(record.flags)
                evaluate(record.final_theta, checkpoint, flag)
            except Exception as exc:  # noqa: BLE001 - per-trial isolation
                failure_rows([checkpoint], exc)
    else:
        try:
            record = _run_anytime(scenario, name, cfg, checkpoints[-1], seed)
        except Exception as exc:  # noqa: BLE001 - per-trial isolation
            failure_rows(checkpoints, exc)
            return rows
        flag = ";".join(record.flags)
        for checkpoint in checkpoints:
            evaluate(record.theta_at(checkpoint), checkpoint, flag)
    return rows


def _worker(payload) -> tuple[int, list[dict]]:
    (task_index, scenario_id, scenario_params, name, user_cfg, trial,
     master_seed, checkpoints, eval_samples) = payload
    scenario = make_scenario(scenario_id, **scenario_params)
    rows = run_trial(scenario, name, user_cfg, trial, master_seed,
                     checkpoints, eval_samples)
    return task_index, rows


# ---------------------------------------------------------------------------
# Full experiment
# ---------------------------------------------------------------------------

def _format_cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def run_experiment(config: ExperimentConfig) -> tuple[str, str]:
    """Run the grid and write raw CSV plus aggregate JSON; returns both paths."""
    os.makedirs(config.out_dir, exist_ok=True)
    tasks = []
    for ai, spec in enumerate(config.algorithms):
        for trial in range(config.trials):
            tasks.append((len(tasks), config.scenario_id, config.scenario_params,
                          spec.name, spec.cfg, trial, config.seed,
                          config.checkpoints, config.eval_samples))

    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            results = list(pool.map(_worker, tasks, chunksize=1))
    else:
        results = [_worker(t) for t in tasks]
    results.sort(key=lambda item: item[0])
    rows = [row for _, batch in results for row in batch]

    csv_path = os.path.join(config.out_dir, "results.csv")
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow([_format_cell(row[col]) for col in CSV_COLUMNS])

    cells = []
    for spec in config.algorithms:
        for checkpoint in config.checkpoints:
            values = [row["metric_value"] for row in rows
                      if row["algorithm"] == spec.name
                      and row["samples"] == checkpoint
                      and row["metric_value"] != ""]
            n_failed = sum(1 for row in rows
                           if row["algorithm"] == spec.name
                           and row["samples"] == checkpoint
                           and row["metric_value"] == "")
            cell = {"algorithm": spec.name, "checkpoint": checkpoint,
                    "n": len(values), "n_failed": n_failed}
            if len(values) >= 2:
                low, high = bootstrap_ci(
                    values, seed=derive_seed(config.seed, "bootstrap", spec.name, checkpoint))
                cell.update(median=float(np.median(values)),
                            mean=float(np.mean(values)), ci_low=low, ci_high=high)
            elif values:
                v = float(values[0])
                cell.update(median=v, mean=v, ci_low=v, ci_high=v)
            else:
                cell.update(median=None, mean=None, ci_low=None, ci_high=None)
            cells.append(cell)

    aggregate = {
        "schema_version": SCHEMA_VERSION,
        "scenario": {"id": config.scenario_id, "params": config.scenario_params},
        "metric": rows[0]["metric_name"] if rows else "",
        "trials": config.trials,
        "seed": config.seed,
        "checkpoints": config.checkpoints,
        "evaluation": {
            "samples_per_eval": config.eval_samples,
            "total_eval_samples": config.eval_samples * sum(
                1 for row in rows if row["metric_value"] != ""),
        },
        "cells": cells,
    }
    json_path = os.path.join(config.out_dir, "aggregate.json")
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(aggregate, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return csv_path, json_path
