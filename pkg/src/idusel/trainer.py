"""Trainer contract and two desk-scale synthetic learners.

A trainer owns its parameters and a fixed pool of samples addressed by id.
The engine calls :meth:`Trainer.score_all` once for initial losses, then
:meth:`Trainer.train_on` with each selected batch. Each step performs one
gradient-descent update with the batch-mean gradient and reports the losses
measured *before* the update (the forward pass of that step) together with
update-direction telemetry.
"""
import math
from dataclasses import dataclass

import numpy as np

from idusel.errors import DomainError
from idusel.idu import GradientStats

SKETCH_DIM = 256
SKETCH_ABOVE = 100_000


@dataclass
class TrainStepReport:
    ids: np.ndarray
    loss_before: np.ndarray
    eta: float
    update_energy: float
    update_dot_prev: float
    update_dot_cluster: float
    direction: np.ndarray
    prev_energy: float = 0.0
    sketched: bool = False

    @property
    def per_sample_loss_before(self):
        return dict(zip(self.ids.tolist(), self.loss_before.tolist()))


class CountSketch:
    """Seeded signed-bucket projection; preserves inner products in expectation."""

    def __init__(self, size, dim=SKETCH_DIM, seed=0):
        rng = np.random.default_rng(seed)
        self.bucket = rng.integers(dim, size=size)
        self.sign = rng.choice(np.array([-1.0, 1.0]), size=size)
        self.dim = dim

    def __call__(self, vec):
        return np.bincount(self.bucket, weights=self.sign * vec, minlength=self.dim)


class Trainer:
    """Shared gradient-step machinery; subclasses supply loss and gradient."""

    def __init__(self, ids, eta, decay_steps=None, seed=0):
        if not eta >= 0:
            raise DomainError(f"eta must be nonnegative, got {eta!r}")
        self.ids = np.asarray(ids, dtype=np.int64)
        self.row = {int(i): p for p, i in enumerate(self.ids)}
        if len(self.row) != len(self.ids):
            raise DomainError("sample ids must be unique")
        self.eta0 = float(eta)
        self.decay_steps = decay_steps
        self.seed = seed
        self.steps = 0
        self.prev_update = None
        self._scored = False
        self._sketch = None

    # subclass hooks
    def losses(self, theta, rows):
        raise NotImplementedError

    def gradient(self, theta, rows):
        raise NotImplementedError

    @property
    def num_params(self):
        return self.theta.size

    def current_eta(self):
        if self.decay_steps:
            return self.eta0 * max(0.0, 1.0 - self.steps / self.decay_steps)
        return self.eta0

    def rows_for(self, ids):
        try:
            return np.fromiter((self.row[int(i)] for i in ids), dtype=np.int64, count=len(ids))
        except KeyError as exc:
            raise DomainError(f"unknown sample id {exc.args[0]}") from None

    def loss_of(self, ids, theta=None):
        return self.losses(self.theta if theta is None else theta, self.rows_for(ids))

    def score_all(self):
        if self._scored:
            raise RuntimeError("score_all may be called only once per run")
        self._scored = True
        return self.losses(self.theta, np.arange(len(self.ids)))

    def _project(self, vec):
        if vec.size <= SKETCH_ABOVE:
            return vec, False
        if self._sketch is None:
            self._sketch = CountSketch(vec.size, seed=self.seed)
        return self._sketch(vec), True

    def train_on(self, batch_ids, cluster_direction=None):
        if len(batch_ids) == 0:
            raise DomainError("train_on needs a non-empty batch")
        # canonical order makes every reduction independent of the caller's ordering
        ids = np.sort(np.asarray(batch_ids, dtype=np.int64))
        rows = self.rows_for(ids)
        eta = self.current_eta()
        loss_before = self.losses(self.theta, rows)
        update = -eta * self.gradient(self.theta, rows)
        self.theta = self.theta + update
        direction, sketched = self._project(update.ravel())
        energy = float(direction @ direction)
        if self.prev_update is None:
            dot_prev, prev_energy = 0.0, 0.0
        else:
            dot_prev = float(direction @ self.prev_update)
            prev_energy = float(self.prev_update @ self.prev_update)
        dot_cluster = 0.0 if cluster_direction is None else float(direction @ cluster_direction)
        self.prev_update = direction
        self.steps += 1
        return TrainStepReport(ids=ids, loss_before=loss_before, eta=eta, update_energy=energy,
                               update_dot_prev=dot_prev, update_dot_cluster=dot_cluster,
                               direction=direction, prev_energy=prev_energy, sketched=sketched)

    def eval_validation(self):
        return None


class QuadraticTrainer(Trainer):
    """Per-sample loss ``0.5 * sum_j lam_j (theta_j - target_j)^2``."""

    def __init__(self, targets, ids=None, curvature=1.0, eta=0.01, seed=0, theta0=None,
                 decay_steps=None, validation_targets=None):
        targets = np.asarray(targets, dtype=np.float64)
        if targets.ndim != 2:
            raise DomainError("targets must be a 2-D array")
        n, d = targets.shape
        super().__init__(np.arange(n) if ids is None else ids, eta, decay_steps, seed)
        lam = np.broadcast_to(np.asarray(curvature, dtype=np.float64), (d,)).copy()
        if np.any(lam <= 0):
            raise DomainError("curvature must be positive")
        self.targets = targets
        self.lam = lam
        if theta0 is None:
            theta0 = np.random.default_rng(seed).normal(size=d)
        self.theta = np.array(theta0, dtype=np.float64)
        self.validation_targets = validation_targets

    def losses(self, theta, rows):
        diff = theta - self.targets[rows]
        return 0.5 * (diff * diff) @ self.lam

    def gradient(self, theta, rows):
        return self.lam * (theta - self.targets[rows].mean(axis=0))

    def eval_validation(self):
        if self.validation_targets is None:
            return None
        diff = self.theta - np.asarray(self.validation_targets)
        return float(np.mean(0.5 * (diff * diff) @ self.lam))


def _log_softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


class LogisticTrainer(Trainer):
    """Multinomial logistic regression (weights plus bias) trained by plain gradient descent."""

    def __init__(self, features, labels, num_classes, ids=None, eta=0.5, seed=0, decay_steps=None,
                 validation=None, init_scale=0.0):
        features = np.asarray(features, dtype=np.float64)
        labels = np.asarray(labels, dtype=np.int64)
        if features.ndim != 2 or labels.shape != (features.shape[0],):
            raise DomainError("features must be (n, d) with one label per row")
        if num_classes < 2 or labels.min() < 0 or labels.max() >= num_classes:
            raise DomainError("labels must lie in [0, num_classes) with num_classes >= 2")
        n, d = features.shape
        super().__init__(np.arange(n) if ids is None else ids, eta, decay_steps, seed)
        self.x = np.column_stack([features, np.ones(n)])
        self.y = labels
        self.num_classes = num_classes
        rng = np.random.default_rng(seed)
        self.theta = init_scale * rng.normal(size=(num_classes, d + 1))
        self.validation = None
        if validation is not None:
            vx, vy = validation
            vx = np.asarray(vx, dtype=np.float64)
            self.validation = (np.column_stack([vx, np.ones(len(vx))]), np.asarray(vy, dtype=np.int64))

    def _nll(self, theta, x, y):
        logp = _log_softmax(x @ theta.T)
        return -logp[np.arange(len(y)), y]

    def losses(self, theta, rows):
        return self._nll(theta, self.x[rows], self.y[rows])

    def gradient(self, theta, rows):
        x, y = self.x[rows], self.y[rows]
        p = np.exp(_log_softmax(x @ theta.T))
        p[np.arange(len(y)), y] -= 1.0
        return p.T @ x / len(y)

    def eval_validation(self):
        if self.validation is None:
            return None
        x, y = self.validation
        return float(self._nll(self.theta, x, y).mean())


def extract_gradient_stats(report, prev, cluster, iteration=None):
    """Fold one step's telemetry into new gradient statistics for ``cluster``.

    Energies are converted from update units to gradient units by dividing
    by ``eta^2``. ``g_k`` and ``cos_phi`` describe the cluster's stored
    direction from its previous selection; a cluster without history refers
    to the current step itself. The stored direction is then replaced.
    """
    eta = report.eta
    g_now = report.update_energy / (eta * eta) if eta > 0 else 0.0
    energies = dict(prev.cluster_energy)
    directions = dict(prev.cluster_direction)
    last_iter = dict(prev.cluster_last_iter)
    raw_energies = dict(prev.cluster_update_energy)
    if cluster in energies:
        g_k = energies[cluster]
        stored_raw = raw_energies.get(cluster, 0.0)
        denom = math.sqrt(report.update_energy * stored_raw)
        cos_phi = 0.0 if denom == 0 else max(-1.0, min(1.0, report.update_dot_cluster / denom))
    else:
        g_k = g_now
        cos_phi = 1.0 if g_now > 0 else 0.0
    energies[cluster] = g_now
    raw_energies[cluster] = report.update_energy
    directions[cluster] = report.direction
    last_iter[cluster] = iteration
    return GradientStats(g_k=g_k, g_prev=g_now, cos_phi=cos_phi, eta=eta if eta > 0 else prev.eta,
                         cluster_energy=energies, cluster_last_iter=last_iter,
                         cluster_direction=directions, cluster_update_energy=raw_energies)
