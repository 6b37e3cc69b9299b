"""Ready-made synthetic runs used by the CLI, the benchmarks and the acceptance suite."""
from dataclasses import dataclass

import numpy as np

from idusel import engine
from idusel.clustering import build_clusters
from idusel.dataset import planted_dataset
from idusel.planner import make_plan
from idusel.trainer import LogisticTrainer, QuadraticTrainer


@dataclass
class PlantedScenario:
    """Four equal difficulty groups; only ``informative`` carries a learnable labelling.

    The validation set is drawn from the informative group, so training on any
    other group cannot lower validation loss. The default budget and sampling
    rate give a plan of 100 iterations with batches of 50.
    """

    group_sizes: tuple = (2000, 2000, 2000, 2000)
    informative: int = 2
    dim: int = 8
    num_classes: int = 2
    separation: float = 1.0
    alpha: float = 0.025
    budget: int = 4950
    eta: float = 0.2
    validation_size: int = 1000
    data_seed: int = 0
    trainer_seed: int = 0
    mode: str = "argmax"

    def build(self):
        n_val = self.validation_size
        sizes = list(self.group_sizes)
        # validation rows are extra draws from the informative group, split off below
        sizes[self.informative] += n_val
        data, group = planted_dataset(sizes, dim=self.dim, num_classes=self.num_classes,
                                      separation=self.separation, informative=self.informative,
                                      seed=self.data_seed)
        in_group = np.flatnonzero(group == self.informative)
        val_rows = in_group[-n_val:]
        keep = np.setdiff1d(np.arange(len(data)), val_rows)
        return data, keep, val_rows

    def trainer(self, data, keep, val_rows):
        return LogisticTrainer(data.embeddings[keep], data.labels[keep], self.num_classes,
                               ids=data.ids[keep], eta=self.eta, seed=self.trainer_seed,
                               validation=(data.embeddings[val_rows], data.labels[val_rows]))

    def run(self, scheduler, selection_seed, log_sink=None):
        data, keep, val_rows = self.build()
        clusters = build_clusters(data.ids[keep], data.ifd[keep], data.embeddings[keep],
                                  seed=selection_seed)
        plan = make_plan(self.budget, self.alpha, [c.size for c in clusters])
        config = engine.EngineConfig(alpha=self.alpha, gamma=plan.gamma, seed=selection_seed,
                                     scheduler=scheduler, mode=self.mode)
        trainer = self.trainer(data, keep, val_rows)
        return engine.run(clusters, trainer, plan, config, log_sink)


def quadratic_pool(group_sizes, dim=4, spread=1.0, seed=0):
    """Quadratic-loss pool: targets around one random centre per group, IFD by group."""
    rng = np.random.default_rng(seed)
    ids, ifd, targets = [], [], []
    start = 0
    for g, size in enumerate(group_sizes):
        centre = 3.0 * rng.normal(size=dim)
        targets.append(centre + spread * rng.normal(size=(size, dim)))
        ifd.append(0.1 * g + 0.1 * rng.uniform(0.0, 0.999, size))
        ids.append(np.arange(start, start + size))
        start += size
    return np.concatenate(ids), np.concatenate(ifd), np.concatenate(targets)


def quadratic_run(group_sizes, budget, alpha=0.05, eta=0.05, seed=0, scheduler="bandit", b=None,
                  T=None, num_task_clusters=4, log_sink=None):
    ids, ifd, targets = quadratic_pool(group_sizes, seed=seed)
    clusters = build_clusters(ids, ifd, targets, num_task_clusters=num_task_clusters, seed=seed)
    plan = make_plan(budget, alpha, [c.size for c in clusters], T_override=T)
    config = engine.EngineConfig(alpha=alpha, gamma=plan.gamma, seed=seed, scheduler=scheduler, b=b)
    trainer = QuadraticTrainer(targets, ids=ids, eta=eta, seed=seed)
    return engine.run(clusters, trainer, plan, config, log_sink)
