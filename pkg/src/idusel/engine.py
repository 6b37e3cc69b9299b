"""Iterative selection loop: pick a difficulty cluster, pick its top-utility samples, train, update.

Each iteration appends one JSON line to the event log. The leading fields
are fixed, in this order::

    t, arm, batch_size, budget_left, beta_star, predicted_delta,
    raw_reward, norm_reward, weights, probabilities, wall_time_ms

followed by replay/diagnostic fields (scheduler, u, eta, g_k, g_prev,
cos_phi, update_energy, update_dot_prev, ids, idu_before, idu_after and,
at the snapshot cadence, idu_snapshot). Floats use Python's shortest
round-trip repr. ``wall_time_ms`` is 0 unless timing is switched on, so
logs from identical configurations are byte-identical.
"""
import json
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from idusel import bandit as bd
from idusel.errors import DomainError, LogFormatError
from idusel.idu import GradientStats, IduState, optimal_beta, predict_loss_change
from idusel.trainer import extract_gradient_stats

log = logging.getLogger(__name__)

FIXED_FIELDS = ("t", "arm", "batch_size", "budget_left", "beta_star", "predicted_delta",
                "raw_reward", "norm_reward", "weights", "probabilities", "wall_time_ms")


@dataclass
class EngineConfig:
    alpha: float = 0.015
    gamma: float = 0.05
    b: float | None = None
    mode: str = "argmax"
    scheduler: str = "bandit"
    seed: int = 0
    epsilon: float = 0.0
    snapshot_every: int = 0
    allow_reselect: bool = True
    record_timing: bool = False

    def validate(self):
        if not 0 < self.alpha <= 1:
            raise DomainError(f"alpha must be in (0, 1], got {self.alpha!r}")
        if not 0 < self.gamma <= 1:
            raise DomainError(f"gamma must be in (0, 1], got {self.gamma!r}")
        if self.b is not None and not 0 <= self.b < 1:
            raise DomainError(f"b must be in [0, 1), got {self.b!r}")
        if self.mode not in ("argmax", "sample"):
            raise DomainError(f"mode must be 'argmax' or 'sample', got {self.mode!r}")
        if self.scheduler not in ("bandit", "uniform"):
            raise DomainError(f"scheduler must be 'bandit' or 'uniform', got {self.scheduler!r}")
        if self.snapshot_every < 0:
            raise DomainError("snapshot_every must be nonnegative")


@dataclass
class RunSummary:
    iterations: int = 0
    total_spent: int = 0
    budget: int = 0
    pulls: list = field(default_factory=list)
    noop_iterations: int = 0
    cumulative_delta_idu: float = 0.0
    final_validation_loss: float | None = None


def batch_quota(cluster_size, alpha, remaining_budget, available):
    return max(0, min(math.floor(alpha * cluster_size), remaining_budget, available))


def split_quota(sizes, n):
    """Spread ``n`` picks over task clusters of the given sizes.

    Every cluster gets ``n // M``; the remainder goes one at a time to the
    clusters in descending size order (lower index first on ties). Shares
    that exceed a cluster's size spill over in the same order.
    """
    m = len(sizes)
    order = sorted(range(m), key=lambda i: (-sizes[i], i))
    shares = [n // m] * m
    for i in order[: n % m]:
        shares[i] += 1
    spill = 0
    for i in range(m):
        if shares[i] > sizes[i]:
            spill += shares[i] - sizes[i]
            shares[i] = sizes[i]
    while spill:
        moved = False
        for i in order:
            if spill and shares[i] < sizes[i]:
                shares[i] += 1
                spill -= 1
                moved = True
        if not moved:
            break
    return shares


def top_by_utility(ids, utility, k):
    """The ``k`` ids with the highest utility, ties broken by ascending id."""
    if k <= 0:
        return np.empty(0, dtype=np.int64)
    order = np.lexsort((ids, -utility))
    return ids[order[:k]]


def select_samples(cluster, state, quota, exhausted=None):
    """Top-utility samples of a difficulty cluster, split across its task clusters."""
    pools = []
    for tc in cluster.task_clusters:
        members = tc.member_ids
        if exhausted:
            members = members[~np.isin(members, np.fromiter(exhausted, dtype=np.int64))]
        pools.append(members)
    available = sum(len(p) for p in pools)
    n = min(quota, available)
    if n <= 0:
        return []
    shares = split_quota([len(p) for p in pools], n)
    picked = []
    for members, share in zip(pools, shares):
        if share:
            picked.extend(top_by_utility(members, state.idu[state.rows(members)], share).tolist())
    return picked


def _floats(values):
    return [float(v) for v in values]


class Engine:
    """Holds the run state and advances it one iteration at a time."""

    def __init__(self, clusters, trainer, plan, config=None, log_sink=None):
        self.config = config or EngineConfig(alpha=plan.alpha, gamma=plan.gamma)
        self.config.validate()
        if not clusters:
            raise DomainError("need at least one difficulty cluster")
        self.clusters = clusters
        self.trainer = trainer
        self.plan = plan
        self.b = plan.b_star if self.config.b is None else self.config.b
        self.sink = log_sink
        self.bandit = bd.new_state(len(clusters), self.config.gamma, self.config.seed,
                                   self.config.epsilon)
        self.uniform_rng = np.random.default_rng(self.config.seed)
        initial = trainer.score_all()
        self.idu = IduState(trainer.ids, initial, self.b)
        self.stats = GradientStats()
        self.t = 0
        self.spent = 0
        self.pulls = [0] * len(clusters)
        self.history = {c: [] for c in range(len(clusters))}
        self.exhausted = set()
        self.summary = RunSummary(budget=plan.budget_B, pulls=self.pulls)

    @property
    def budget_left(self):
        return self.plan.budget_B - self.spent

    def done(self):
        return self.t >= self.plan.T or self.budget_left <= 0

    def _choose(self):
        if self.config.scheduler == "uniform":
            k = self.bandit.num_arms
            return int(self.uniform_rng.integers(k)), np.full(k, 1.0 / k), None
        return bd.select_arm(self.bandit, self.config.mode)

    def run_iteration(self):
        if self.done():
            raise DomainError("run is complete: budget exhausted or T reached")
        start = time.perf_counter()
        self.t += 1
        arm, probs, u = self._choose()
        cluster = self.clusters[arm]
        # select_samples further caps the quota by the cluster's non-exhausted members
        quota = batch_quota(cluster.size, self.config.alpha, self.budget_left, cluster.size)
        ids = select_samples(cluster, self.idu, quota, self.exhausted)
        record = dict.fromkeys(FIXED_FIELDS)
        record.update(t=self.t, arm=arm, batch_size=len(ids), probabilities=_floats(probs))
        if not ids:
            self.summary.noop_iterations += 1
            record.update(budget_left=self.budget_left, weights=_floats(self.bandit.weights),
                          wall_time_ms=0)
            return self._emit(record, start, extra={"scheduler": self.config.scheduler, "u": u})
        try:
            report = self.trainer.train_on(ids, self.stats.cluster_direction.get(arm))
        except Exception:
            if self.sink is not None:
                self.sink.flush()
            raise
        self.stats = extract_gradient_stats(report, self.stats, arm, self.t)
        beta = optimal_beta(self.stats.g_k, self.stats.g_prev, self.stats.cos_phi)
        delta = predict_loss_change(self.stats, beta)
        rows = self.idu.rows(report.ids)
        before, after = self.idu.apply(rows, report.loss_before, delta)
        self.idu.t = self.t
        raw = bd.info_gain_reward(before, after)
        norm = bd.normalize_reward(raw, self.bandit)
        if self.config.scheduler == "bandit":
            self.bandit = bd.update_weight(self.bandit, arm, norm, probs[arm])
        self.spent += len(ids)
        self.pulls[arm] += 1
        self.history[arm].append(self.t)
        if not self.config.allow_reselect:
            self.exhausted.update(report.ids.tolist())
        self.summary.cumulative_delta_idu += float(np.sum(after - before))
        record.update(budget_left=self.budget_left, beta_star=beta, predicted_delta=delta,
                      raw_reward=raw, norm_reward=norm, weights=_floats(self.bandit.weights))
        extra = {
            "scheduler": self.config.scheduler,
            "u": u,
            "eta": report.eta,
            "g_k": self.stats.g_k,
            "g_prev": self.stats.g_prev,
            "cos_phi": self.stats.cos_phi,
            "update_energy": report.update_energy,
            "update_dot_prev": report.update_dot_prev,
            "b": self.b,
            "ids": report.ids.tolist(),
            "idu_before": _floats(before),
            "idu_after": _floats(after),
        }
        return self._emit(record, start, extra)

    def _emit(self, record, start, extra):
        every = self.config.snapshot_every
        if every and self.t % every == 0:
            extra["idu_snapshot"] = _floats(self.idu.idu)
        record["wall_time_ms"] = ((time.perf_counter() - start) * 1e3 if self.config.record_timing
                                  else 0)
        record.update(extra)
        self.summary.iterations = self.t
        self.summary.total_spent = self.spent
        if self.sink is not None:
            self.sink.write(json.dumps(record, allow_nan=False) + "\n")
        log.debug("t=%d arm=%d |S|=%d left=%d", self.t, record["arm"], record["batch_size"],
                  record["budget_left"])
        return record

    def run(self):
        while not self.done():
            self.run_iteration()
        if self.sink is not None:
            self.sink.flush()
        self.summary.final_validation_loss = self.trainer.eval_validation()
        return self.summary


def run(clusters, trainer, plan, config=None, log_sink=None):
    return Engine(clusters, trainer, plan, config, log_sink).run()


def read_log(lines):
    """Parse event log lines; raises LogFormatError naming the first bad line."""
    records = []
    for number, line in enumerate(lines, start=1):
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise LogFormatError(f"line {number}: malformed record ({exc.msg})", number) from None
        if not isinstance(rec, dict) or list(rec)[: len(FIXED_FIELDS)] != list(FIXED_FIELDS):
            raise LogFormatError(f"line {number}: missing or misordered fixed fields", number)
        records.append(rec)
    return records


def replay_arms(records, gamma, mode="argmax", epsilon=0.0):
    """Recompute every arm choice from the logged rewards alone.

    Starts from uniform weights, re-derives the probabilities and the choice
    at each step, and applies the logged normalized reward. Raises
    AssertionError at the first step whose choice or weights disagree.
    """
    if not records:
        return []
    k = len(records[0]["weights"])
    state = bd.new_state(k, gamma, epsilon=epsilon)
    arms = []
    for rec in records:
        probs = bd.arm_probabilities(state)
        if rec.get("scheduler", "bandit") == "uniform":
            arm = rec["arm"]
        elif mode == "argmax":
            arm = int(np.argmax(probs))
        else:
            arm = bd.categorical(probs, rec["u"])
        if arm != rec["arm"] or _floats(probs) != rec["probabilities"]:
            raise AssertionError(f"replay diverged at t={rec['t']}")
        if rec["batch_size"] and rec.get("scheduler", "bandit") == "bandit":
            state = bd.update_weight(state, arm, rec["norm_reward"], probs[arm])
        if state.weights != rec["weights"] and rec.get("scheduler", "bandit") == "bandit":
            raise AssertionError(f"replay weights diverged at t={rec['t']}")
        arms.append(arm)
    return arms
