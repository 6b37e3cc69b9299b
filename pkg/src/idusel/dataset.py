"""Dataset ingestion format and the planted-cluster generator.

The ingestion file is comma-delimited text with a header row::

    id,ifd,loss0,e_1,...,e_d

The header fixes the embedding dimension ``d``. Floats are written with 17
significant digits so a write/read round trip is lossless. Class labels for
the logistic trainer, when present, go to a sidecar file ``<path>.labels``
holding one integer per line in row order.
"""
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from idusel.errors import DomainError


@dataclass
class Dataset:
    ids: np.ndarray
    ifd: np.ndarray
    loss0: np.ndarray
    embeddings: np.ndarray
    labels: np.ndarray | None = None

    def __len__(self):
        return len(self.ids)

    @property
    def dim(self):
        return self.embeddings.shape[1]


def header(dim):
    return ",".join(["id", "ifd", "loss0"] + [f"e_{j}" for j in range(1, dim + 1)])


def write_dataset(path, data):
    path = Path(path)
    n = len(data.ids)
    table = np.column_stack([data.ifd, data.loss0, data.embeddings]) if n else np.empty((0, 2 + data.dim))
    with open(path, "w", newline="") as fh:
        fh.write(header(data.dim) + "\n")
        fmt = "%d," + ",".join(["%.17g"] * table.shape[1]) + "\n"
        for i, row in zip(data.ids.tolist(), table.tolist()):
            fh.write(fmt % (i, *row))
    if data.labels is not None:
        np.savetxt(labels_path(path), np.asarray(data.labels, dtype=np.int64), fmt="%d")


def labels_path(path):
    return Path(str(path) + ".labels")


def read_dataset(path):
    path = Path(path)
    with open(path) as fh:
        head = fh.readline().strip().split(",")
    if head[:3] != ["id", "ifd", "loss0"] or len(head) < 4:
        raise DomainError(f"{path}: header must start with id,ifd,loss0 and declare e_1..e_d")
    dim = len(head) - 3
    if head[3:] != [f"e_{j}" for j in range(1, dim + 1)]:
        raise DomainError(f"{path}: embedding columns must be named e_1..e_{dim}")
    ids = np.loadtxt(path, delimiter=",", skiprows=1, usecols=0, dtype=np.int64, ndmin=1)
    table = np.loadtxt(path, delimiter=",", skiprows=1, usecols=range(1, dim + 3), dtype=np.float64,
                       ndmin=2)
    if len(np.unique(ids)) != len(ids):
        raise DomainError(f"{path}: duplicate sample ids")
    labels = None
    lp = labels_path(path)
    if lp.exists():
        labels = np.loadtxt(lp, dtype=np.int64, ndmin=1)
        if len(labels) != len(ids):
            raise DomainError(f"{lp}: expected {len(ids)} labels, found {len(labels)}")
    return Dataset(ids=ids, ifd=table[:, 0].copy(), loss0=table[:, 1].copy(),
                   embeddings=table[:, 2:].copy(), labels=labels)


def planted_dataset(cluster_sizes, dim=8, num_classes=None, separation=3.0, noise=1.0,
                    informative=None, seed=0):
    """Gaussian samples planted around one mean per group, one group per IFD bin.

    Group ``g`` draws its points from ``N(mu_g, noise^2 I)`` and receives IFD
    values inside ``[0.1 g, 0.1 (g + 1))``, so binning at width 0.1 recovers
    the groups. Within a group the IFD rises monotonically with the sample's
    distance to its group mean (a proxy for class-conditional loss under a
    nearest-mean classifier).

    Labels: each group owns ``num_classes`` labels; when ``informative`` is a
    group index, that group's labels follow the sign of a fixed direction
    (learnable), while all other groups get uniformly random labels.
    """
    sizes = [int(s) for s in cluster_sizes]
    if not sizes or sum(sizes) <= 0 or min(sizes) < 0:
        raise DomainError("cluster_sizes must be non-empty with a positive total")
    rng = np.random.default_rng(seed)
    groups = len(sizes)
    means = rng.normal(size=(groups, dim))
    means *= separation / np.linalg.norm(means, axis=1, keepdims=True)
    direction = rng.normal(size=dim)
    direction /= np.linalg.norm(direction)
    emb, ifd, grp = [], [], []
    for g, s in enumerate(sizes):
        x = means[g] + noise * rng.normal(size=(s, dim))
        dist = np.linalg.norm(x - means[g], axis=1)
        # monotone squash of distance into the group's IFD interval
        frac = dist / (dist + np.sqrt(dim) * noise) if s else dist
        ifd.append(0.1 * g + 0.1 * np.clip(frac, 0.0, 0.999))
        emb.append(x)
        grp.append(np.full(s, g))
    emb = np.concatenate(emb)
    ifd = np.concatenate(ifd)
    grp = np.concatenate(grp)
    n = len(ifd)
    labels = None
    if num_classes is not None:
        labels = rng.integers(num_classes, size=n)
        if informative is not None:
            mask = grp == informative
            proj = (emb[mask] - means[informative]) @ direction
            labels[mask] = np.where(proj > 0, 1, 0) % num_classes
    ids = np.arange(n, dtype=np.int64)
    return Dataset(ids=ids, ifd=ifd, loss0=np.zeros(n), embeddings=emb, labels=labels), grp
