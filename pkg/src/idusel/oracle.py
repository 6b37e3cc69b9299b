"""Brute-force cross-checks of the closed forms.

Each check re-derives its reference value by a different route (grid
search, explicit vectors, direct expansion, simulation) instead of calling
the formula helpers it is checking.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from idusel import kernels
from idusel.idu import optimal_beta, update_idu
from idusel.planner import make_plan, min_steps, optimal_b
from idusel.trainer import QuadraticTrainer

GRID_STEP = 1e-4
BETA_TOL = 2e-3


@dataclass
class OracleReport:
    name: str
    max_abs_dev: float
    max_rel_dev: float
    passed: bool
    trials: int
    seed: int | None = None
    details: dict = field(default_factory=dict)

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        extra = " ".join(f"{k}={v}" for k, v in self.details.items())
        return (f"{status} {self.name} trials={self.trials} seed={self.seed} "
                f"max_abs_dev={self.max_abs_dev:.3e} max_rel_dev={self.max_rel_dev:.3e} {extra}").rstrip()


def _beta_grid_argmin(g_k, g_prev, cos_phi):
    """Grid argmin of ||beta u + (1 - beta) v||^2 for explicit 2-D vectors; also flatness."""
    phi = math.acos(max(-1.0, min(1.0, cos_phi)))
    u = math.sqrt(g_k) * np.array([1.0, 0.0])
    v = math.sqrt(g_prev) * np.array([math.cos(phi), math.sin(phi)])
    grid = np.linspace(0.0, 1.0, int(round(1 / GRID_STEP)) + 1)
    combo = grid[:, None] * u + (1.0 - grid[:, None]) * v
    obj = (combo * combo).sum(axis=1)
    flat = obj.max() - obj.min() <= 1e-12 * max(1.0, g_k + g_prev)
    return float(grid[np.argmin(obj)]), flat


def check_beta_grid(trials=1000, seed=0, cases=None):
    """Closed-form beta against the grid minimiser, for random or given triples."""
    rng = np.random.default_rng(seed)
    if cases is None:
        cases = zip(rng.uniform(0.0, 10.0, trials), rng.uniform(0.0, 10.0, trials),
                    rng.uniform(-1.0, 1.0, trials))
    worst, n, ok = 0.0, 0, True
    for g_k, g_prev, c in cases:
        n += 1
        target, flat = _beta_grid_argmin(g_k, g_prev, c)
        if flat:
            continue
        dev = abs(optimal_beta(g_k, g_prev, c) - target)
        worst = max(worst, dev)
        ok &= dev <= BETA_TOL
    return OracleReport("beta_grid", worst, worst, ok, n, seed, {"tol": BETA_TOL})


def check_taylor(eta_values=(0.01, 0.005, 0.0025), seed=0, dim=4, curvature=1.0):
    """First-order loss change against the exact change of one quadratic step.

    The relative error is measured against the first-order prediction and
    equals ``eta * curvature / 2`` exactly for this loss.
    """
    rng = np.random.default_rng(seed)
    target = rng.normal(size=(1, dim))
    theta0 = rng.normal(size=dim)
    errors, devs, ok = [], [], True
    for eta in eta_values:
        trainer = QuadraticTrainer(target, curvature=curvature, eta=eta, theta0=theta0.copy())
        theta_before = trainer.theta.copy()
        trainer.train_on([0])
        # independent re-evaluation of the loss and its gradient
        grad = curvature * (theta_before - target[0])
        before = 0.5 * curvature * float(np.sum((theta_before - target[0]) ** 2))
        after = 0.5 * curvature * float(np.sum((trainer.theta - target[0]) ** 2))
        exact = after - before
        first_order = -eta * float(grad @ grad)
        rel = abs(exact - first_order) / abs(first_order)
        expected = eta * curvature / 2
        errors.append(rel)
        devs.append(abs(rel - expected))
        ok &= rel <= expected * (1 + 1e-6) and abs(rel - expected) <= 1e-6
    ratios = [errors[i] / errors[i + 1] for i in range(len(errors) - 1)]
    ok &= all(1.9 <= r <= 2.1 for r in ratios)
    return OracleReport("taylor", max(devs), max(devs), bool(ok), len(eta_values), seed,
                        {"rel_errors": [round(e, 9) for e in errors],
                         "ratios": [round(r, 6) for r in ratios]})


def check_idu_expansion(T=50, b=0.5, seed=0, tol=1e-10):
    """Recursive smoothing against its unrolled closed form at every step."""
    rng = np.random.default_rng(seed)
    losses = rng.uniform(0.0, 5.0, T)
    changes = -rng.uniform(0.0, 1.0, T)
    idu0 = float(rng.uniform(0.0, 5.0))
    value, worst = idu0, 0.0
    for t in range(1, T + 1):
        value = update_idu(value, losses[t - 1], changes[t - 1], b)
        terms = [b**k * (losses[t - 1 - k] + changes[t - 1 - k]) for k in range(t)]
        direct = (1 - b) * math.fsum(terms) + b**t * idu0
        worst = max(worst, abs(value - direct))
    return OracleReport(f"idu_expansion[b={b}]", worst, worst, worst <= tol, T, seed, {"tol": tol})


def random_plans(count=1000, seed=0):
    rng = np.random.default_rng(seed)
    plans = []
    while len(plans) < count:
        k = int(rng.integers(1, 12))
        sizes = rng.integers(10, 200_000, size=k)
        alpha = float(rng.uniform(0.001, 1.0))
        budget = int(rng.integers(1, 1_000_000))
        extra = int(rng.integers(0, 50))
        plan = make_plan(budget, alpha, sizes)
        plans.append(make_plan(budget, alpha, sizes, T_override=plan.T + extra))
    return plans


def check_budget_tightness(plans, tol=1e-9):
    """Expected spend over the plan's iterations equals the budget."""
    worst = 0.0
    for p in plans:
        spend = p.T * p.n0 * (1.0 - p.b_star) * (1.0 + p.cv_squared)
        worst = max(worst, abs(spend - p.budget_B) / p.budget_B)
    return OracleReport("budget_tightness", worst, worst, worst <= tol, len(plans), None, {"tol": tol})


def _alignment(beta, g_k, g_prev, cos_phi):
    u = beta * beta * g_k
    v = (1 - beta) * (1 - beta) * g_prev
    w = 2 * beta * (1 - beta) * math.sqrt(g_k * g_prev) * cos_phi
    return u + v + w


def check_decomposition(records, t_threshold=5, tol=1e-9):
    """Batch utility change against its gradient-alignment decomposition.

    For t past the threshold, the batch-summed smoothed change term must
    equal ``(1 - b) eta |S| Psi`` rebuilt from the logged statistics. For the
    early steps the historical correction is evaluated with both candidate
    exponents and compared against the observed batch change; these numbers
    are reported, not asserted.
    """
    worst, n = 0.0, 0
    early = {"exp_t-1": 0.0, "exp_t-2": 0.0}
    prev_delta = None
    for rec in records:
        if not rec["batch_size"]:
            continue
        b, size, t = rec["b"], rec["batch_size"], rec["t"]
        psi = _alignment(rec["beta_star"], rec["g_k"], rec["g_prev"], rec["cos_phi"])
        model = (1 - b) * rec["eta"] * size * psi
        engine_side = (1 - b) * size * abs(rec["predicted_delta"])
        if t > t_threshold:
            n += 1
            worst = max(worst, abs(model - engine_side) / max(abs(model), 1e-300))
        elif prev_delta is not None:
            observed = math.fsum(a - x for a, x in zip(rec["idu_after"], rec["idu_before"]))
            for key, power in (("exp_t-1", t - 1), ("exp_t-2", t - 2)):
                approx = -model + b * size * prev_delta * (1 - b**power)
                early[key] += abs(approx - observed)
        prev_delta = rec["predicted_delta"]
    better = min(early, key=early.get) if any(early.values()) else "n/a"
    details = {"early_abs_dev_t-1": f"{early['exp_t-1']:.3e}",
               "early_abs_dev_t-2": f"{early['exp_t-2']:.3e}", "better_exponent": better}
    return OracleReport("decomposition", worst, worst, worst <= tol, n, None, details)


def _stationary_top_share(sizes, gamma, rounds, seed, b):
    """Pull share of the most-pulled arm when each arm's reward is a fixed constant."""
    from idusel import bandit as bd

    share = (1 - b) * np.asarray(sizes, dtype=float) / np.sum(sizes)
    state = bd.new_state(len(sizes), gamma, seed)
    counts = np.zeros(len(sizes), dtype=int)
    for _ in range(rounds):
        arm, probs, _u = bd.select_arm(state, "sample")
        norm = bd.normalize_reward(float(share[arm]), state)
        state = bd.update_weight(state, arm, norm, probs[arm])
        counts[arm] += 1
    return float(counts.max() / rounds)


def check_exp3_steady_state(cluster_sizes, gamma=0.05, rounds=100_000, seed=0, b=0.1, tol=0.05,
                            stationary_rounds=10_000):
    """Sampled EXP3 pull frequencies against cluster-size shares.

    The environment replenishes each arm's pending utility at a rate
    proportional to ``(1 - b) |C_i|``; a pull collects and resets it. Pull
    frequencies then settle where per-pull rewards equalise, which is the
    size-proportional allocation. For contrast, the share captured by the top
    arm under fixed per-arm rewards is reported (not asserted).
    """
    sizes = np.asarray(cluster_sizes, dtype=np.float64)
    supply = (1 - b) * sizes / sizes.sum()
    uniforms = np.random.default_rng(seed).random(rounds)
    chosen, _w = kernels.exp3_rollout(np.ones(len(sizes)), gamma, supply, uniforms)
    freq = np.bincount(chosen, minlength=len(sizes)) / rounds
    target = sizes / sizes.sum()
    dev = float(np.max(np.abs(freq - target)))
    ok = dev <= tol
    if np.ptp(sizes) > 0:
        ok &= int(np.argmax(freq)) == int(np.argmax(sizes))
    details = {"freq": [round(float(f), 4) for f in freq], "backend": kernels.BACKEND}
    if stationary_rounds:
        details["stationary_top_share"] = round(
            _stationary_top_share(sizes, gamma, stationary_rounds, seed, b), 4)
    return OracleReport("exp3_steady_state", dev, dev, bool(ok), rounds, seed, details)


WORKED_SIZES = (62828, 61844, 71712, 69728, 93923, 107415, 52574)


def check_worked_example():
    plan = make_plan(15000, 0.015, WORKED_SIZES)
    targets = {"mean": (plan.mean_cluster_size, 74289.14, 0.01), "cv2": (plan.cv_squared, 0.0586, 5e-4),
               "n0": (plan.n0, 1114.3, 0.1), "b_star": (plan.b_star, 0.092, 1e-3)}
    devs = {k: abs(v - ref) for k, (v, ref, _tol) in targets.items()}
    ok = all(devs[k] <= tol for k, (_v, _r, tol) in targets.items()) and plan.T_min == 14
    ok &= min_steps(15000, plan.n0, plan.cv_squared) == 14
    ok &= abs(optimal_b(15000, plan.n0, 14, plan.cv_squared) - plan.b_star) == 0
    return OracleReport("worked_example", max(devs.values()), 0.0, bool(ok), 1, None,
                        {"T_min": plan.T_min, "b_star": round(plan.b_star, 6)})


def exp3_trajectory(steps, seed, num_arms=7, gamma=0.05):
    """Sampled EXP3 driven by heavy-tailed fuzzed raw rewards; returns per-step records."""
    from idusel import bandit as bd

    fuzz = np.random.default_rng(seed + 1)
    state = bd.new_state(num_arms, gamma, seed)
    rows = []
    for _ in range(steps):
        arm, probs, _u = bd.select_arm(state, "sample")
        raw = float(fuzz.normal() * 10.0 ** fuzz.uniform(-6, 6))
        norm = bd.normalize_reward(raw, state)
        state = bd.update_weight(state, arm, norm, probs[arm])
        rows.append((probs, norm, list(state.weights)))
    return rows


def check_exp3_invariants(steps=10_000, seed=0, num_arms=7, gamma=0.05):
    """Probability simplex, exploration floor and reward range at every step, plus seed replay."""
    rows = exp3_trajectory(steps, seed, num_arms, gamma)
    floor = gamma / num_arms
    sum_dev = max(abs(math.fsum(p) - 1.0) for p, _n, _w in rows)
    ok = sum_dev <= 1e-12
    ok &= all(float(p.min()) >= floor for p, _n, _w in rows)
    ok &= all(-1.0 <= n <= 1.0 for _p, n, _w in rows)
    replay = exp3_trajectory(steps, seed, num_arms, gamma)
    identical = all(a[2] == b[2] for a, b in zip(rows, replay))
    ok &= identical
    return OracleReport("exp3_invariants", sum_dev, sum_dev, bool(ok), steps, seed,
                        {"replay_identical": identical})


def check_end_to_end(seeds=range(10), scenario=None, required=8):
    """The bandit scheduler against the uniform cluster scheduler on the planted dataset, per selection seed."""
    from idusel.scenarios import PlantedScenario

    scenario = scenario or PlantedScenario()
    wins, gaps, within_budget = 0, [], True
    for s in seeds:
        adaptive = scenario.run("bandit", s)
        uniform = scenario.run("uniform", s)
        within_budget &= adaptive.total_spent <= adaptive.budget and uniform.total_spent <= uniform.budget
        gap = uniform.final_validation_loss - adaptive.final_validation_loss
        gaps.append(gap)
        wins += gap > 0
    n = len(gaps)
    ok = wins >= required and within_budget
    return OracleReport("end_to_end", 0.0, 0.0, bool(ok), n, None,
                        {"wins": f"{wins}/{n}", "min_gap": round(float(min(gaps)), 6), "required": required, "within_budget": within_budget,
                         "mean_gap": round(float(np.mean(gaps)), 6)})


def check_determinism(seed=0):
    """Two runs of one configuration must write byte-identical event logs."""
    import io

    from idusel.scenarios import quadratic_run

    logs = []
    for _ in range(2):
        sink = io.StringIO()
        quadratic_run([300, 200, 100], budget=400, alpha=0.05, seed=seed, log_sink=sink)
        logs.append(sink.getvalue().encode())
    same = logs[0] == logs[1]
    return OracleReport("determinism", 0.0 if same else 1.0, 0.0, same, 2, seed,
                        {"log_bytes": len(logs[0])})


def _decomposition_trace(seed):
    import io
    import json

    from idusel.scenarios import quadratic_run

    sink = io.StringIO()
    quadratic_run([400, 300, 200], budget=600, alpha=0.05, seed=seed, log_sink=sink)
    return [json.loads(line) for line in sink.getvalue().splitlines()]


def run_all(seed=0, fast=False):
    reports = [check_worked_example(), check_beta_grid(200 if fast else 1000, seed), check_taylor(seed=seed)]
    for b in (0.0, 0.1, 0.5, 0.9):
        reports.append(check_idu_expansion(50, b, seed))
    reports.append(check_budget_tightness(random_plans(200 if fast else 1000, seed)))
    reports.append(check_exp3_invariants(2_000 if fast else 10_000, seed))
    reports.append(check_decomposition(_decomposition_trace(seed)))
    reports.append(check_exp3_steady_state(WORKED_SIZES, 0.05, 20_000 if fast else 100_000, seed,
                                           stationary_rounds=0 if fast else 10_000))
    reports.append(check_end_to_end(range(3) if fast else range(10), required=2 if fast else 8))
    reports.append(check_determinism(seed))
    return reports
