"""Scratch tuning script (not part of the package)."""
import time

import numpy as np

from perfpred.optim import dfo, greedy_sgd, lazy_sgd, two_stage
from perfpred.scenarios import election_linreg_scenario
from perfpred.seeding import derive_seed


def gap(scenario, theta):
    return scenario.references.pr(theta) - scenario.references.pr_min


def eval_dfo(eps, cfg, trials=8, budget=100_000):
    scenario = election_linreg_scenario(d=20, eps=eps, seed=0)
    t0 = time.time()
    finals, curves = [], []
    for trial in range(trials):
        record = dfo(scenario.map, scenario.loss, scenario.domain, budget,
                     derive_seed(1, trial), cfg=dict(cfg, theta0=np.ones(20)))
        finals.append(gap(scenario, record.final_theta))
        curve = [gap(scenario, record.theta_at(c))
                 for c in (100, 1000, 10_000, 100_000)]
        curves.append(curve)
    med_curve = np.median(curves, axis=0)
    init = gap(scenario, np.ones(20))
    print(f"eps={eps} cfg={cfg} t={time.time()-t0:.1f}s init={init:.4g} "
          f"curve={np.array2string(med_curve, precision=4)} "
          f"final_med={np.median(finals):.4g} thresh(0.05init)={0.05*init:.4g}")
    return np.median(finals), init


def eval_sgd(eps, trials=5, budget=100_000):
    scenario = election_linreg_scenario(d=20, eps=eps, seed=0)
    t0 = time.time()
    g_final, l_final, ts_final = [], [], []
    for trial in range(trials):
        g = greedy_sgd(scenario.map, scenario.loss, scenario.domain, budget,
                       derive_seed(2, trial),
                       cfg={"theta0": np.ones(20), "record_every": 50})
        l = lazy_sgd(scenario.map, scenario.loss, scenario.domain, budget,
                     derive_seed(3, trial), cfg={"theta0": np.ones(20)})
        ts = two_stage(scenario.map, scenario.loss, scenario.domain, budget // 2,
                       derive_seed(4, trial))
        g_final.append(gap(scenario, g.final_theta))
        l_final.append(gap(scenario, l.final_theta))
        ts_final.append(gap(scenario, ts.final_theta))
    init = gap(scenario, np.ones(20))
    print(f"eps={eps} t={time.time()-t0:.1f}s init={init:.4g} "
          f"greedy={np.median(g_final):.4g} lazy={np.median(l_final):.4g} "
          f"two_stage={np.median(ts_final):.4g}")


if __name__ == "__main__":
    print("=== sgd baselines ===")
    eval_sgd(100.0)
    eval_sgd(0.01)
    print("=== dfo eps=100 ===")
    for cfg in ({"c0": 0.01, "batch": 20, "delta": 5.0},
                {"c0": 0.01, "batch": 20, "delta": 1.0},
                {"c0": 0.01, "batch": 20, "delta": 0.1},
                {"c0": 0.001, "batch": 20, "delta": 0.5}):
        eval_dfo(100.0, cfg)
    print("=== dfo eps=0.01 ===")
    for cfg in ({"c0": 0.01, "batch": 20, "delta": 5.0},
                {"c0": 100.0, "batch": 1, "delta": 1.0},
                {"c0": 300.0, "batch": 1, "delta": 1.0},
                {"c0": 100.0, "batch": 5, "delta": 2.0}):
        eval_dfo(0.01, cfg)
