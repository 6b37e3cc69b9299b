"""Smoothed per-sample utility and the gradient-based loss-change prediction.

Every formula here is written in nonnegative gradient energies
``g = ||grad L||^2``: ``g_k`` for the trained cluster's stored direction,
``g_prev`` for the most recent step, and ``cos_phi`` for the angle between
the two directions.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from idusel.errors import DomainError

# Below this denominator the two directions coincide and beta is a tie.
_DEGENERATE = 1e-12


@dataclass
class GradientStats:
    g_k: float = 0.0
    g_prev: float = 0.0
    cos_phi: float = 1.0
    eta: float = 1.0
    cluster_energy: dict = field(default_factory=dict)
    cluster_last_iter: dict = field(default_factory=dict)
    # stored update direction and its raw (update-unit) energy per cluster
    cluster_direction: dict = field(default_factory=dict, repr=False)
    cluster_update_energy: dict = field(default_factory=dict, repr=False)

    def validate(self):
        if self.g_k < 0 or self.g_prev < 0:
            raise DomainError("gradient energies must be nonnegative")
        if abs(self.cos_phi) > 1:
            raise DomainError(f"cos_phi must lie in [-1, 1], got {self.cos_phi!r}")
        if not self.eta > 0:
            raise DomainError(f"eta must be positive, got {self.eta!r}")


def _check_triple(g_k, g_prev, cos_phi):
    if g_k < 0 or g_prev < 0:
        raise DomainError(f"gradient energies must be nonnegative, got {g_k!r}, {g_prev!r}")
    if not -1 <= cos_phi <= 1:
        raise DomainError(f"cos_phi must lie in [-1, 1], got {cos_phi!r}")


def optimal_beta(g_k, g_prev, cos_phi):
    """Weight on the cluster's stored direction minimising ``||beta u + (1 - beta) v||^2``.

    The unconstrained minimiser is clamped to [0, 1]; a vanishing
    denominator (identical directions) returns 0.5.
    """
    _check_triple(g_k, g_prev, cos_phi)
    cross = math.sqrt(g_k * g_prev) * cos_phi
    denom = g_k + g_prev - 2.0 * cross
    if abs(denom) < _DEGENERATE:
        return 0.5
    return min(1.0, max(0.0, (g_prev - cross) / denom))


def mixed_energy(g_k, g_prev, cos_phi, beta):
    """Squared norm of the convex combination of the two directions."""
    return (beta * beta * g_k + (1.0 - beta) ** 2 * g_prev
            + 2.0 * beta * (1.0 - beta) * math.sqrt(g_k * g_prev) * cos_phi)


def predict_loss_change(stats, beta):
    """First-order predicted loss change for the trained batch; never positive."""
    stats.validate()
    if not 0 <= beta <= 1:
        raise DomainError(f"beta must be in [0, 1], got {beta!r}")
    energy = mixed_energy(stats.g_k, stats.g_prev, stats.cos_phi, beta)
    # round-off can push a zero-norm combination slightly negative
    return -stats.eta * max(energy, 0.0)


def update_idu(prev_idu, current_loss, predicted_change, b):
    """One step of ``(1 - b) (loss + change) + b prev``. Works elementwise on arrays.

    Evaluated as ``prev + (1 - b) (target - prev)`` so a sample already at
    its fixed point stays there bit-for-bit.
    """
    if not 0 <= b < 1:
        raise DomainError(f"b must be in [0, 1), got {b!r}")
    target = current_loss + predicted_change
    if b == 0:
        return target
    return prev_idu + (1.0 - b) * (target - prev_idu)


def error_bound(eta, hessian_norm_max, grad_energy, grad_residual_energy):
    """Taylor and gradient-reconstruction terms bounding the predicted-loss error."""
    for name, value in (("eta", eta), ("hessian_norm_max", hessian_norm_max),
                        ("grad_energy", grad_energy), ("grad_residual_energy", grad_residual_energy)):
        if value < 0:
            raise DomainError(f"{name} must be nonnegative, got {value!r}")
    eps_taylor = 0.5 * eta * eta * hessian_norm_max * grad_energy
    eps_approx = eta * grad_residual_energy
    return eps_taylor, eps_approx


class IduState:
    """Per-sample smoothed utilities, indexed by row position.

    ``idu`` starts at the initial full-pass loss; samples that are not
    trained keep their last value.
    """

    def __init__(self, ids, initial_loss, b):
        if not 0 <= b < 1:
            raise DomainError(f"b must be in [0, 1), got {b!r}")
        self.ids = np.asarray(ids, dtype=np.int64)
        self.idu = np.array(initial_loss, dtype=np.float64)
        self.last_loss = self.idu.copy()
        self.b = b
        self.t = 0
        self.row = {int(i): p for p, i in enumerate(self.ids)}

    def rows(self, ids):
        return np.fromiter((self.row[int(i)] for i in ids), dtype=np.int64, count=len(ids))

    def apply(self, rows, losses, predicted_change):
        """Update the given rows; returns ``(before, after)`` arrays."""
        before = self.idu[rows].copy()
        after = update_idu(before, np.asarray(losses, dtype=np.float64), predicted_change, self.b)
        self.idu[rows] = after
        self.last_loss[rows] = losses
        return before, after
