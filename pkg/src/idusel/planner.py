"""Closed-form budget planning: expected batch size, smoothing coefficient, minimum iterations."""
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from idusel.clustering import cluster_stats
from idusel.errors import DomainError, InfeasiblePlanError

DEFAULT_GAMMA = 0.05
DEFAULT_ALPHA = 0.015


@dataclass(frozen=True)
class BudgetPlan:
    budget_B: int
    alpha: float
    n0: float
    cv_squared: float
    T: int
    b_star: float
    gamma: float = DEFAULT_GAMMA
    mean_cluster_size: float = 0.0
    T_min: int = 0
    b_raw: float = 0.0


def expected_batch_size(alpha, b, mean_cluster_size, cv_squared):
    """Expected samples drawn per round, ``alpha (1 - b) mean (1 + CV^2)``.

    The exploration correction of order gamma is taken as exactly 1.
    """
    if not 0 < alpha <= 1:
        raise DomainError(f"alpha must be in (0, 1], got {alpha!r}")
    if not 0 <= b <= 1:
        raise DomainError(f"b must be in [0, 1], got {b!r}")
    if not mean_cluster_size > 0:
        raise DomainError(f"mean_cluster_size must be positive, got {mean_cluster_size!r}")
    if not cv_squared >= 0:
        raise DomainError(f"cv_squared must be nonnegative, got {cv_squared!r}")
    return alpha * (1.0 - b) * mean_cluster_size * (1.0 + cv_squared)


def _check_positive(**kwargs):
    for name, value in kwargs.items():
        if not value > 0:
            raise DomainError(f"{name} must be positive, got {value!r}")


def raw_b(budget_B, n0, T, cv_squared):
    """Unclamped smoothing coefficient that makes the expected spend equal the budget."""
    _check_positive(budget_B=budget_B, n0=n0, T=T)
    if not cv_squared >= 0:
        raise DomainError(f"cv_squared must be nonnegative, got {cv_squared!r}")
    return 1.0 - budget_B / (n0 * T * (1.0 + cv_squared))


def optimal_b(budget_B, n0, T, cv_squared):
    """Budget-tight smoothing coefficient ``1 - B / (n0 T (1 + CV^2))``.

    Raises InfeasiblePlanError (carrying the raw value) when T is too small
    for a nonnegative coefficient.
    """
    b = raw_b(budget_B, n0, T, cv_squared)
    if b < 0:
        raise InfeasiblePlanError(
            f"T={T} cannot spend B={budget_B} with b >= 0 (raw b = {b!r}); "
            f"need T >= {min_steps(budget_B, n0, cv_squared)}", raw_b=b)
    return b


def min_steps(budget_B, n0, cv_squared):
    """Smallest T with a valid smoothing coefficient: ``ceil(B / (n0 (1 + CV^2))) + 1``."""
    _check_positive(budget_B=budget_B, n0=n0)
    if not cv_squared >= 0:
        raise DomainError(f"cv_squared must be nonnegative, got {cv_squared!r}")
    return math.ceil(budget_B / (n0 * (1.0 + cv_squared))) + 1


def make_plan(budget_B, alpha, cluster_sizes, T_override=None, gamma=DEFAULT_GAMMA):
    if not 0 < alpha <= 1:
        raise DomainError(f"alpha must be in (0, 1], got {alpha!r}")
    if not 0 < gamma < 1:
        raise DomainError(f"gamma must be in (0, 1), got {gamma!r}")
    mean, cv2 = cluster_stats(cluster_sizes)
    n0 = alpha * mean
    t_min = min_steps(budget_B, n0, cv2)
    T = t_min if T_override is None else max(int(T_override), t_min)
    b = optimal_b(budget_B, n0, T, cv2)
    return BudgetPlan(budget_B=int(budget_B), alpha=alpha, n0=n0, cv_squared=cv2, T=T, b_star=b,
                      gamma=gamma, mean_cluster_size=mean, T_min=t_min, b_raw=b)


def check_override(budget_B, alpha, cluster_sizes, T):
    """Evaluate a literal iteration count without lifting it to T_min; raises if infeasible."""
    mean, cv2 = cluster_stats(cluster_sizes)
    return optimal_b(budget_B, alpha * mean, T, cv2)


_INT_FIELDS = {"budget_B", "T", "T_min"}

_PLAN_COMMENTS = [
    "# budget plan",
    "# n0 = alpha * mean_cluster_size",
    "# cv_squared = population variance of cluster sizes / mean^2",
    "# T_min = ceil(budget_B / (n0 * (1 + cv_squared))) + 1",
    "# b_star = 1 - budget_B / (n0 * T * (1 + cv_squared))",
]


def dumps_plan(plan):
    lines = list(_PLAN_COMMENTS)
    for key, value in asdict(plan).items():
        lines.append(f"{key} = {value!r}")
    return "\n".join(lines) + "\n"


def loads_plan(text):
    known = {f.name for f in fields(BudgetPlan)}
    values = {}
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or key not in known:
            raise DomainError(f"plan line {number}: unrecognised entry {line!r}")
        values[key] = int(value) if key in _INT_FIELDS else float(value)
    missing = known - values.keys()
    if missing:
        raise DomainError(f"plan is missing {sorted(missing)}")
    return BudgetPlan(**values)


def save_plan(path, plan):
    Path(path).write_text(dumps_plan(plan))


def load_plan(path):
    return loads_plan(Path(path).read_text())
