"""Budget-aware training-data selection by smoothed per-sample utility and an EXP3 cluster scheduler."""
from idusel.bandit import BanditState, arm_probabilities, new_state, normalize_reward, select_arm, update_weight
from idusel.clustering import DifficultyCluster, TaskCluster, build_clusters, compute_ifd, kmeans
from idusel.engine import Engine, EngineConfig, RunSummary
from idusel.errors import ConfigError, DomainError, InfeasiblePlanError, LogFormatError
from idusel.idu import GradientStats, IduState, optimal_beta, predict_loss_change, update_idu
from idusel.kernels import BACKEND
from idusel.planner import BudgetPlan, make_plan, min_steps, optimal_b
from idusel.trainer import LogisticTrainer, QuadraticTrainer, Trainer

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "BanditState", "BudgetPlan", "ConfigError", "DifficultyCluster", "DomainError", "Engine",
    "EngineConfig", "GradientStats", "IduState", "InfeasiblePlanError", "LogFormatError", "LogisticTrainer",
    "QuadraticTrainer", "RunSummary", "TaskCluster", "Trainer", "arm_probabilities", "build_clusters",
    "compute_ifd", "kmeans", "make_plan", "min_steps", "new_state", "normalize_reward", "optimal_b",
    "optimal_beta", "predict_loss_change", "select_arm", "update_idu", "update_weight",
]
