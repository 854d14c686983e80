"""Command-line harness: run experiment grids, certify convexity, probe dominance."""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np
import yaml

from .bench import load_config, run_experiment
from .dominance import check_mixture_dominance
from .errors import ConfigurationError, DomainError, UnsupportedScenarioError
from .risk import _uniform_in_domain
from .scenarios import make_scenario, scenario_descriptions
from .seeding import derive_seed

JOBS_ENV_VAR = "PERFPRED_JOBS"


def _parse_params(pairs) -> dict:
    params = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise ConfigurationError(f"--param expects key=value, got {pair!r}")
        key, raw = pair.split("=", 1)
        params[key.strip()] = yaml.safe_load(raw)
    return params


def _cmd_run(args) -> int:
    config = load_config(args.config)
    if args.out is not None:
        config.out_dir = args.out
    if args.seed is not None:
        config.seed = args.seed
    if args.trials is not None:
        config.trials = args.trials
        if config.trials < 1:
            raise ConfigurationError("trials must be >= 1")
    env_jobs = os.environ.get(JOBS_ENV_VAR)
    if env_jobs is not None:
        config.jobs = int(env_jobs)
    if args.jobs is not None:
        config.jobs = args.jobs
    if config.jobs < 1:
        raise ConfigurationError("jobs must be >= 1")
    csv_path, json_path = run_experiment(config)
    print(csv_path)
    print(json_path)
    return 0


def _cmd_list_scenarios(_args) -> int:
    for name, description in sorted(scenario_descriptions().items()):
        print(f"{name}: {description}")
    return 0


def _cmd_certify(args) -> int:
    scenario = make_scenario(args.scenario, **_parse_params(args.param))
    cert = scenario.certificate()
    payload = cert.to_dict()
    payload["scenario"] = scenario.scenario_id
    print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


def _cmd_dominance(args) -> int:
    scenario = make_scenario(args.scenario, **_parse_params(args.param))
    rng = np.random.default_rng(derive_seed(args.seed, "dominance-probes"))
    reports = []
    for k in range(args.probes):
        theta = _uniform_in_domain(scenario.domain, scenario.map.d, rng)
        theta_prime = _uniform_in_domain(scenario.domain, scenario.map.d, rng)
        theta0 = _uniform_in_domain(scenario.domain, scenario.map.d, rng)
        alpha = float(rng.uniform(0.05, 0.95))
        report = check_mixture_dominance(
            scenario.map, scenario.loss, theta, theta_prime, theta0, alpha,
            args.samples, derive_seed(args.seed, "dominance", k))
        reports.append(report.to_dict())
    verdicts = [r["holds"] for r in reports]
    payload = {
        "scenario": scenario.scenario_id,
        "probes": reports,
        "summary": {v: verdicts.count(v) for v in ("yes", "indeterminate", "no")},
    }
    print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="perfpred",
        description="Benchmark harness for optimizing under decision-dependent "
                    "distribution shift.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario x algorithm x seed grid")
    run.add_argument("--config", required=True, help="YAML experiment file")
    run.add_argument("--out", help="output directory (overrides config)")
    run.add_argument("--seed", type=int, help="master seed (overrides config)")
    run.add_argument("--trials", type=int, help="trial count (overrides config)")
    run.add_argument("--jobs", type=int,
                     help=f"worker count (overrides config and ${JOBS_ENV_VAR})")
    run.set_defaults(func=_cmd_run)

    ls = sub.add_parser("list-scenarios", help="list built-in scenarios")
    ls.set_defaults(func=_cmd_list_scenarios)

    certify = sub.add_parser("certify", help="print a convexity certificate")
    certify.add_argument("--scenario", required=True)
    certify.add_argument("--param", action="append", metavar="KEY=VALUE")
    certify.set_defaults(func=_cmd_certify)

    dom = sub.add_parser("dominance", help="probe mixture dominance on a scenario")
    dom.add_argument("--scenario", required=True)
    dom.add_argument("--probes", type=int, default=20)
    dom.add_argument("--samples", type=int, default=2000)
    dom.add_argument("--seed", type=int, default=0)
    dom.add_argument("--param", action="append", metavar="KEY=VALUE")
    dom.set_defaults(func=_cmd_dominance)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, DomainError, UnsupportedScenarioError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
