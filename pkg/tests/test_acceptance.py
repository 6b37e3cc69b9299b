"""Acceptance suite: one test per headline criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v`` (the lines are repeated
in the terminal summary) or ``python tests/test_acceptance.py``.
"""
import io
import json
import math
import time

import numpy as np
import pytest

from idusel import cli, oracle
from idusel.planner import make_plan
from idusel.scenarios import PlantedScenario, quadratic_run

RESULTS = []
WORKED_SIZES = [62828, 61844, 71712, 69728, 93923, 107415, 52574]


def record(number, title, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {title} | {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def test_c1_worked_example():
    start = time.perf_counter()
    plan = make_plan(15000, 0.015, WORKED_SIZES)
    elapsed = time.perf_counter() - start
    checks = {
        "mean": abs(plan.mean_cluster_size - 74289.14) <= 0.01,
        "cv2": abs(plan.cv_squared - 0.0586) <= 0.0005,
        "n0": abs(plan.n0 - 1114.3) <= 0.1,
        "T_min": plan.T_min == 14,
        "b*": abs(plan.b_star - 0.092) <= 0.001,
        "time": elapsed < 1.0,
    }
    record(1, "worked example", all(checks.values()),
           f"mean={plan.mean_cluster_size:.4f} cv2={plan.cv_squared:.5f} n0={plan.n0:.3f} "
           f"T_min={plan.T_min} b*={plan.b_star:.5f} time={elapsed:.4f}s failed={[k for k, v in checks.items() if not v]}")


def test_c2_beta_grid():
    start = time.perf_counter()
    rep = oracle.check_beta_grid(trials=1000, seed=0)
    elapsed = time.perf_counter() - start
    ok = rep.passed and rep.trials == 1000 and rep.max_abs_dev <= 2e-3 and elapsed < 10
    record(2, "beta* vs grid argmin", ok, f"trials={rep.trials} max_dev={rep.max_abs_dev:.2e} time={elapsed:.2f}s")


def test_c3_taylor():
    etas = (0.01, 0.005, 0.0025)
    rep = oracle.check_taylor(etas)
    errs, ratios = rep.details["rel_errors"], rep.details["ratios"]
    ok = (rep.passed and all(abs(e - eta / 2) <= 1e-6 for e, eta in zip(errs, etas))
          and all(1.9 <= r <= 2.1 for r in ratios))
    record(3, "first-order loss change on the quadratic trainer", ok, f"rel_errors={errs} ratios={ratios}")


def test_c4_idu_recursion():
    reps = [oracle.check_idu_expansion(T=50, b=b, seed=0) for b in (0.0, 0.1, 0.5, 0.9)]
    worst = max(r.max_abs_dev for r in reps)
    record(4, "IDU recursion vs direct expansion", all(r.passed for r in reps) and worst <= 1e-10,
           f"max_abs_dev={worst:.2e} over b in (0, 0.1, 0.5, 0.9)")


def test_c5_exp3_invariants():
    rep = oracle.check_exp3_invariants(steps=10_000, seed=0)
    # replay on the engine: two runs of the sampling scheduler give identical weight trajectories
    traces = []
    for _ in range(2):
        sink = io.StringIO()
        quadratic_run([300, 200, 150, 100], budget=600, alpha=0.02, seed=6, log_sink=sink)
        traces.append([json.loads(l)["weights"] for l in sink.getvalue().splitlines()])
    ok = rep.passed and traces[0] == traces[1]
    record(5, "EXP3 invariants and seed replay", ok,
           f"steps={rep.trials} max_sum_dev={rep.max_abs_dev:.2e} replay_identical={rep.details['replay_identical']} "
           f"engine_replay_identical={traces[0] == traces[1]}")


def test_c6_budget():
    plans = oracle.random_plans(1000, seed=0)
    rep = oracle.check_budget_tightness(plans)
    runs = []
    for seed in range(4):
        for budget, alpha in ((150, 0.05), (997, 0.2), (40, 0.5)):
            s = quadratic_run([300, 200, 120], budget=budget, alpha=alpha, seed=seed)
            runs.append(s.total_spent <= s.budget)
    planted = PlantedScenario().run("bandit", 0)
    runs.append(planted.total_spent <= planted.budget)
    ok = rep.passed and all(runs)
    record(6, "budget tightness and safety", ok,
           f"plans={rep.trials} max_rel_dev={rep.max_rel_dev:.2e} end_to_end_runs_within_budget={sum(runs)}/{len(runs)}")


def test_c7_steady_state():
    rep = oracle.check_exp3_steady_state(WORKED_SIZES, gamma=0.05, rounds=100_000, seed=0)
    freq = rep.details["freq"]
    top = int(np.argmax(freq)) == int(np.argmax(WORKED_SIZES))
    record(7, "EXP3 steady-state proportionality", rep.passed and rep.max_abs_dev <= 0.05 and top,
           f"max_abs_dev={rep.max_abs_dev:.4f} freq={freq} largest_pulled_most={top}")


def test_c8_end_to_end():
    start = time.perf_counter()
    rep = oracle.check_end_to_end(seeds=range(10), required=8)
    elapsed = time.perf_counter() - start
    record(8, "bandit scheduler beats uniform cluster scheduling", rep.passed and elapsed < 120,
           f"wins={rep.details['wins']} mean_gap={rep.details['mean_gap']} time={elapsed:.1f}s")


def test_c9_determinism(tmp_path, capsys):
    data = tmp_path / "d.csv"
    assert cli.main(["gen", "--out", str(data), "--sizes", "300,200,200", "--trainer", "logistic",
                     "--informative", "1", "--seed", "4"]) == 0
    logs = []
    for name in ("a", "b"):
        cfg = tmp_path / f"{name}.json"
        log = tmp_path / f"{name}.jsonl"
        cfg.write_text(json.dumps({"data": str(data), "alpha": 0.05, "budget": 120, "trainer": "logistic",
                                   "trainer_params": {"eta": 0.2}, "log": str(log), "snapshot_every": 4,
                                   "mode": "sample", "seed": 9}))
        assert cli.main(["run", "--config", str(cfg)]) == 0
        logs.append(log.read_bytes())
    capsys.readouterr()
    record(9, "byte-identical event logs", logs[0] == logs[1] and len(logs[0]) > 0,
           f"bytes={len(logs[0])} identical={logs[0] == logs[1]}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
