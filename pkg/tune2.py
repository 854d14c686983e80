"""Scratch tuning: criterion-7 configs (eps=0.01) and criterion-6 recheck."""
import time

import numpy as np

from perfpred.optim import dfo, greedy_sgd, lazy_sgd
from perfpred.scenarios import election_linreg_scenario
from perfpred.seeding import derive_seed


def gap(scenario, theta):
    return scenario.references.pr(theta) - scenario.references.pr_min


def eval_algo(eps, algo, cfg, trials=8, budget=100_000, label=""):
    scenario = election_linreg_scenario(d=20, eps=eps, seed=0)
    t0 = time.time()
    finals = []
    for trial in range(trials):
        if algo == "dfo":
            record = dfo(scenario.map, scenario.loss, scenario.domain, budget,
                         derive_seed(1, trial), cfg=dict(cfg, theta0=np.ones(20)))
        elif algo == "greedy":
            record = greedy_sgd(scenario.map, scenario.loss, scenario.domain, budget,
                                derive_seed(2, trial),
                                cfg=dict(cfg, theta0=np.ones(20), record_every=1000))
        else:
            record = lazy_sgd(scenario.map, scenario.loss, scenario.domain, budget,
                              derive_seed(3, trial), cfg=dict(cfg, theta0=np.ones(20)))
        finals.append(gap(scenario, record.final_theta))
    init = gap(scenario, np.ones(20))
    print(f"{algo} eps={eps} {label} cfg={cfg} t={time.time()-t0:.1f}s "
          f"final={np.median(finals):.4g} vs 0.05*init={0.05*init:.4g}")
    return np.median(finals)


if __name__ == "__main__":
    print("=== eps=0.01: greedy schedules ===")
    for c in (1.0, 10.0, 30.0, 100.0):
        eval_algo(0.01, "greedy", {"schedule": {"kind": "inv_sqrt", "c": c}})
    print("=== eps=0.01: lazy steps ===")
    for c in (1.0, 30.0, 100.0, 300.0):
        eval_algo(0.01, "lazy", {"c": c, "k0": 1.0})
    print("=== eps=0.01: dfo ===")
    for cfg in ({"c0": 300.0, "batch": 1, "delta": 0.5},
                {"c0": 600.0, "batch": 1, "delta": 1.0},
                {"c0": 1000.0, "batch": 1, "delta": 1.0},
                {"c0": 300.0, "batch": 1, "delta": 2.0}):
        eval_algo(0.01, "dfo", cfg)
    print("=== eps=100: sanity with tuned-for-7 style cfgs ===")
    eval_algo(100.0, "dfo", {"c0": 0.01, "batch": 20, "delta": 0.1})
    eval_algo(100.0, "greedy", {"schedule": {"kind": "inv_sqrt", "c": 1.0}})
    eval_algo(100.0, "lazy", {"c": 1.0, "k0": 1.0})
