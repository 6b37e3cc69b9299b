"""Command-line entry point: ``idusel {gen,cluster,plan,run,verify,report}``.

Exit codes: 0 success, 1 domain error, 2 configuration error, 3 verification
failure. ``IDUSEL_LOG_LEVEL`` (DEBUG, INFO, WARNING, ...) sets log verbosity.

``cluster``, ``plan`` and ``run`` read a JSON run configuration (``--config``)
whose keys are the fields of :class:`RunConfig`; command-line flags override
individual keys.
"""
import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field, fields


from idusel import engine, oracle
from idusel.clustering import assignment_table, build_clusters
from idusel.dataset import planted_dataset, read_dataset, write_dataset
from idusel.errors import ConfigError, DomainError, InfeasiblePlanError, LogFormatError
from idusel.planner import load_plan, make_plan, raw_b, save_plan
from idusel.trainer import LogisticTrainer, QuadraticTrainer

log = logging.getLogger("idusel")

# the recommended fixed smoothing coefficient when the planner's value is overridden
B_OVERRIDE_DEFAULT = 0.1

TRAINER_PARAMS = {
    "quadratic": {"eta": 0.01, "curvature": 1.0, "decay_steps": None},
    "logistic": {"eta": 0.5, "num_classes": None, "decay_steps": None},
}


@dataclass
class RunConfig:
    data: str | None = None
    bin_width: float = 0.1
    num_bins: int = 10
    task_clusters: int = 4
    alpha: float = 0.015
    budget: int | None = None
    T: int | None = None
    gamma: float = 0.05
    b: float | None = None
    seed: int = 0
    trainer: str = "quadratic"
    trainer_params: dict = field(default_factory=dict)
    log: str | None = None
    snapshot_every: int = 0
    mode: str = "argmax"
    scheduler: str = "bandit"

    def validate(self):
        def need(ok, key, rule):
            if not ok:
                raise ConfigError(f"{key}={getattr(self, key)!r}: {rule}")

        def is_int(v):
            return isinstance(v, int) and not isinstance(v, bool)

        def is_num(v):
            return isinstance(v, (int, float)) and not isinstance(v, bool)

        need(self.data is None or isinstance(self.data, str), "data", "must be a path string")
        need(is_num(self.bin_width) and self.bin_width > 0, "bin_width", "must be > 0")
        need(is_int(self.num_bins) and self.num_bins >= 1, "num_bins", "must be an integer >= 1")
        need(is_int(self.task_clusters) and self.task_clusters >= 1, "task_clusters",
             "must be an integer >= 1")
        need(is_num(self.alpha) and 0 < self.alpha <= 1, "alpha", "must be in (0, 1]")
        need(self.budget is None or (is_int(self.budget) and self.budget >= 1), "budget",
             "must be an integer >= 1")
        need(self.T is None or (is_int(self.T) and self.T >= 1), "T", "must be an integer >= 1")
        need(is_num(self.gamma) and 0 < self.gamma < 1, "gamma", "must be in (0, 1)")
        need(self.b is None or (is_num(self.b) and 0 <= self.b < 1), "b", "must be in [0, 1)")
        need(is_int(self.seed) and self.seed >= 0, "seed", "must be a nonnegative integer")
        need(self.trainer in TRAINER_PARAMS, "trainer", f"must be one of {sorted(TRAINER_PARAMS)}")
        need(isinstance(self.trainer_params, dict), "trainer_params", "must be an object")
        unknown = set(self.trainer_params) - set(TRAINER_PARAMS[self.trainer])
        if unknown:
            raise ConfigError(f"trainer_params: unknown keys {sorted(unknown)} for {self.trainer!r}")
        params = self.trainer_settings()
        if not (is_num(params["eta"]) and params["eta"] > 0):
            raise ConfigError(f"trainer_params.eta={params['eta']!r}: must be > 0")
        if params["decay_steps"] is not None and not (is_int(params["decay_steps"])
                                                      and params["decay_steps"] >= 1):
            raise ConfigError("trainer_params.decay_steps: must be an integer >= 1")
        if self.trainer == "quadratic" and not (is_num(params["curvature"]) and params["curvature"] > 0):
            raise ConfigError("trainer_params.curvature: must be > 0")
        if self.trainer == "logistic" and params["num_classes"] is not None and not (
                is_int(params["num_classes"]) and params["num_classes"] >= 2):
            raise ConfigError("trainer_params.num_classes: must be an integer >= 2")
        need(self.log is None or isinstance(self.log, str), "log", "must be a path string")
        need(is_int(self.snapshot_every) and self.snapshot_every >= 0, "snapshot_every",
             "must be a nonnegative integer")
        need(self.mode in ("argmax", "sample"), "mode", "must be 'argmax' or 'sample'")
        need(self.scheduler in ("bandit", "uniform"), "scheduler", "must be 'bandit' or 'uniform'")
        return self

    def trainer_settings(self):
        return {**TRAINER_PARAMS[self.trainer], **self.trainer_params}


def load_config(path=None, overrides=None):
    """Build a validated RunConfig from an optional JSON file plus flag overrides."""
    values = {}
    if path is not None:
        try:
            with open(path) as fh:
                values = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc.msg} at line {exc.lineno})") from None
        except OSError as exc:
            raise ConfigError(f"{path}: {exc.strerror}") from None
        if not isinstance(values, dict):
            raise ConfigError(f"{path}: top level must be a JSON object")
    known = {f.name for f in fields(RunConfig)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return RunConfig(**values).validate()


def parse_sizes(text):
    try:
        sizes = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"sizes must be comma-separated integers, got {text!r}") from None
    if not sizes or min(sizes) < 0:
        raise ConfigError(f"sizes must be nonnegative integers, got {text!r}")
    return sizes


def make_trainer(cfg, data, ids=None):
    params = cfg.trainer_settings()
    if cfg.trainer == "quadratic":
        return QuadraticTrainer(data.embeddings, ids=data.ids if ids is None else ids,
                                curvature=params["curvature"], eta=params["eta"], seed=cfg.seed,
                                decay_steps=params["decay_steps"])
    if data.labels is None:
        raise DomainError("the logistic trainer needs a labels sidecar next to the dataset")
    classes = params["num_classes"] or int(data.labels.max()) + 1
    return LogisticTrainer(data.embeddings, data.labels, max(classes, 2),
                           ids=data.ids if ids is None else ids, eta=params["eta"], seed=cfg.seed,
                           decay_steps=params["decay_steps"])


def _require_data(cfg):
    if cfg.data is None:
        raise ConfigError("data: a dataset path is required (config key 'data' or --data)")
    try:
        return read_dataset(cfg.data)
    except OSError as exc:
        raise ConfigError(f"data: cannot read {cfg.data!r} ({exc.strerror})") from None


def _clusters(cfg, data):
    return build_clusters(data.ids, data.ifd, data.embeddings, cfg.bin_width, cfg.num_bins,
                          cfg.task_clusters, cfg.seed)


def cmd_gen(args):
    sizes = parse_sizes(args.sizes)
    if sum(sizes) == 0:
        raise DomainError("zero samples requested; nothing written")
    if args.dim < 1:
        raise ConfigError(f"dim={args.dim}: must be >= 1")
    classes = args.classes if args.trainer == "logistic" else None
    data, _group = planted_dataset(sizes, dim=args.dim, num_classes=classes,
                                   separation=args.separation, informative=args.informative,
                                   seed=args.seed)
    cfg = RunConfig(trainer=args.trainer, seed=args.seed).validate()
    data.loss0 = make_trainer(cfg, data).score_all()
    write_dataset(args.out, data)
    print(f"wrote {len(data)} rows to {args.out}")
    return 0


def cmd_cluster(args, cfg):
    data = _require_data(cfg)
    bins = _clusters(cfg, data)
    ids, dbin, tcl = assignment_table(bins)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "difficulty_bin", "task_cluster"])
        writer.writerows(zip(ids.tolist(), dbin.tolist(), tcl.tolist()))
    for dc in bins:
        lo, hi = dc.ifd_range
        print(f"bin {dc.index}: ifd [{lo:g}, {hi:g}) size={dc.size} "
              f"task_clusters={[tc.size for tc in dc.task_clusters]}")
    return 0


def plan_for(cfg, sizes):
    """Budget plan for the config; a T override below T_min is rejected, not lifted."""
    plan = make_plan(cfg.budget, cfg.alpha, sizes, gamma=cfg.gamma)
    if cfg.T is None:
        return plan
    if cfg.T < plan.T_min:
        raw = raw_b(cfg.budget, plan.n0, cfg.T, plan.cv_squared)
        raise InfeasiblePlanError(f"T={cfg.T} is below T_min={plan.T_min} (raw b = {raw!r})", raw_b=raw)
    return make_plan(cfg.budget, cfg.alpha, sizes, T_override=cfg.T, gamma=cfg.gamma)


def cmd_plan(args, cfg):
    if cfg.budget is None:
        raise ConfigError("budget: required for planning")
    if args.sizes is not None:
        sizes = parse_sizes(args.sizes)
    else:
        sizes = [c.size for c in _clusters(cfg, _require_data(cfg))]
    plan = plan_for(cfg, sizes)
    print(f"clusters = {len(sizes)}")
    print(f"mean_cluster_size = {plan.mean_cluster_size:.6f}")
    print(f"cv_squared = {plan.cv_squared:.7f}")
    print(f"n0 = {plan.n0:.4f}")
    print(f"T_min={plan.T_min}")
    print(f"T={plan.T}")
    print(f"b*={plan.b_star:.6f}")
    if args.out:
        save_plan(args.out, plan)
    return 0


def cmd_run(args, cfg):
    if cfg.log is None:
        raise ConfigError("log: an event log path is required (config key 'log' or --log)")
    data = _require_data(cfg)
    clusters = _clusters(cfg, data)
    sizes = [c.size for c in clusters]
    if args.plan:
        plan = load_plan(args.plan)
    else:
        if cfg.budget is None:
            raise ConfigError("budget: required unless --plan is given")
        plan = plan_for(cfg, sizes)
    config = engine.EngineConfig(alpha=cfg.alpha, gamma=cfg.gamma, b=cfg.b, mode=cfg.mode,
                                 scheduler=cfg.scheduler, seed=cfg.seed,
                                 snapshot_every=cfg.snapshot_every)
    trainer = make_trainer(cfg, data)
    with open(cfg.log, "w") as sink:
        summary = engine.run(clusters, trainer, plan, config, sink)
    out = asdict(summary)
    out.update(T=plan.T, b=plan.b_star if cfg.b is None else cfg.b, log=cfg.log)
    text = json.dumps(out, indent=2)
    print(text)
    if args.summary:
        with open(args.summary, "w") as fh:
            fh.write(text + "\n")
    return 0


def cmd_verify(args):
    reports = oracle.run_all(seed=args.seed, fast=args.fast)
    for r in reports:
        print(r.line())
    failed = [r.name for r in reports if not r.passed]
    if failed:
        print(f"verification failed: {', '.join(failed)}", file=sys.stderr)
        return 3
    print(f"all {len(reports)} checks passed")
    return 0


REPORT_COLUMNS = ["t", "arm", "batch_size", "budget_left", "beta_star", "predicted_delta",
                  "raw_reward", "norm_reward", "prob_chosen", "weight_chosen", "wall_time_ms"]


def report_rows(records):
    for rec in records:
        arm = rec["arm"]
        row = {k: rec.get(k) for k in REPORT_COLUMNS}
        row["prob_chosen"] = rec["probabilities"][arm]
        row["weight_chosen"] = rec["weights"][arm]
        yield ["" if row[k] is None else row[k] for k in REPORT_COLUMNS]


def cmd_report(args):
    with open(args.log) as fh:
        records = engine.read_log(fh.read().splitlines())
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.writer(out, delimiter=args.delimiter, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        writer.writerows(report_rows(records))
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="idusel", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write a synthetic planted-cluster dataset")
    g.add_argument("--out", required=True)
    g.add_argument("--sizes", default=",".join(str(s) for s in oracle.WORKED_SIZES),
                   help="comma-separated group sizes, one group per difficulty bin")
    g.add_argument("--dim", type=int, default=8)
    g.add_argument("--trainer", choices=sorted(TRAINER_PARAMS), default="quadratic")
    g.add_argument("--classes", type=int, default=2)
    g.add_argument("--informative", type=int, default=None)
    g.add_argument("--separation", type=float, default=3.0)
    g.add_argument("--seed", type=int, default=0)

    def add_config(p):
        p.add_argument("--config")
        p.add_argument("--data")
        p.add_argument("--bin-width", dest="bin_width", type=float)
        p.add_argument("--num-bins", dest="num_bins", type=int)
        p.add_argument("--task-clusters", dest="task_clusters", type=int)
        p.add_argument("--alpha", type=float)
        p.add_argument("--budget", type=int)
        p.add_argument("--T", dest="T", type=int)
        p.add_argument("--gamma", type=float)
        p.add_argument("--seed", type=int)

    c = sub.add_parser("cluster", help="assign samples to difficulty bins and task clusters")
    add_config(c)
    c.add_argument("--out", required=True)

    p = sub.add_parser("plan", help="compute the budget plan")
    add_config(p)
    p.add_argument("--sizes", help="cluster sizes; skips clustering a dataset")
    p.add_argument("--out")

    r = sub.add_parser("run", help="run the selection loop and write the event log")
    add_config(r)
    r.add_argument("--b", type=float, nargs="?", const=B_OVERRIDE_DEFAULT,
                   help=f"fix the smoothing coefficient (bare flag: {B_OVERRIDE_DEFAULT})")
    r.add_argument("--trainer", choices=sorted(TRAINER_PARAMS))
    r.add_argument("--log")
    r.add_argument("--plan", help="plan file from 'idusel plan'; replaces planning from the config")
    r.add_argument("--mode", choices=["argmax", "sample"])
    r.add_argument("--scheduler", choices=["bandit", "uniform"])
    r.add_argument("--snapshot-every", dest="snapshot_every", type=int)
    r.add_argument("--summary")

    v = sub.add_parser("verify", help="run the numerical cross-checks")
    v.add_argument("--fast", action="store_true", help="fewer trials per check")
    v.add_argument("--seed", type=int, default=0)

    rp = sub.add_parser("report", help="export a per-iteration table from an event log")
    rp.add_argument("log")
    rp.add_argument("--out")
    rp.add_argument("--delimiter", default=",")
    return parser


_CONFIG_FLAGS = ("data", "bin_width", "num_bins", "task_clusters", "alpha", "budget", "T", "gamma",
                 "seed", "b", "trainer", "log", "mode", "scheduler", "snapshot_every")


def main(argv=None):
    level = os.environ.get("IDUSEL_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "gen":
            return cmd_gen(args)
        if args.command == "verify":
            return cmd_verify(args)
        if args.command == "report":
            return cmd_report(args)
        overrides = {k: getattr(args, k) for k in _CONFIG_FLAGS if hasattr(args, k)}
        cfg = load_config(args.config, overrides)
        return {"cluster": cmd_cluster, "plan": cmd_plan, "run": cmd_run}[args.command](args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except InfeasiblePlanError as exc:
        print(f"infeasible plan: {exc}", file=sys.stderr)
        print(f"raw b = {exc.raw_b!r}", file=sys.stderr)
        return 1
    except (DomainError, LogFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
