"""Offline dual-level partition: difficulty bins over IFD, k-means task clusters inside each bin."""
import math
from dataclasses import dataclass, field

import numpy as np

from idusel import kernels
from idusel.errors import DomainError


@dataclass
class SampleRecord:
    id: int
    ifd: float
    embedding: np.ndarray
    current_loss: float = 0.0
    idu: float = 0.0
    last_selected_iter: int | None = None
    difficulty_bin: int | None = None
    task_cluster: int | None = None


@dataclass
class TaskCluster:
    index: int
    member_ids: np.ndarray
    centroid: np.ndarray

    @property
    def size(self):
        return len(self.member_ids)


@dataclass
class DifficultyCluster:
    index: int
    ifd_range: tuple
    member_ids: np.ndarray
    task_clusters: list = field(default_factory=list)

    @property
    def size(self):
        return len(self.member_ids)


def compute_ifd(ppl_conditional, ppl_unconditional):
    """Instruction-following difficulty: conditional over unconditional perplexity."""
    if not ppl_conditional > 0:
        raise DomainError(f"ppl_conditional must be positive, got {ppl_conditional!r}")
    if not ppl_unconditional > 0:
        raise DomainError(f"ppl_unconditional must be positive, got {ppl_unconditional!r}")
    return ppl_conditional / ppl_unconditional


def bin_index(ifd, bin_width, num_bins):
    return min(int(math.floor(ifd / bin_width)), num_bins - 1)


def bin_by_difficulty(ids, ifd, bin_width=0.1, num_bins=10):
    """Group samples into half-open IFD intervals of width ``bin_width``.

    Values past the last interval are clamped into it. Empty bins are dropped
    and the survivors re-indexed densely in ascending IFD order. Member ids
    inside a bin are sorted, so the result does not depend on input order.
    """
    if not bin_width > 0:
        raise DomainError(f"bin_width must be positive, got {bin_width!r}")
    if num_bins < 1:
        raise DomainError(f"num_bins must be >= 1, got {num_bins!r}")
    ids = np.asarray(ids, dtype=np.int64)
    ifd = np.asarray(ifd, dtype=np.float64)
    if ids.shape != ifd.shape:
        raise DomainError("ids and ifd must have the same length")
    if np.any(ifd < 0) or not np.all(np.isfinite(ifd)):
        raise DomainError("ifd values must be finite and nonnegative")
    raw = np.minimum(np.floor(ifd / bin_width), num_bins - 1).astype(np.int64)
    out = []
    for b in np.unique(raw):
        members = np.sort(ids[raw == b])
        lo = b * bin_width
        hi = math.inf if b == num_bins - 1 else (b + 1) * bin_width
        out.append(DifficultyCluster(index=len(out), ifd_range=(lo, hi), member_ids=members))
    return out


def _kmeanspp_init(points, k, rng):
    # greedy k-means++: several D^2 candidates per step, keep the one with lowest potential
    n = points.shape[0]
    trials = 2 + int(math.log(k))
    centers = np.empty((k, points.shape[1]))
    first = int(rng.integers(n))
    centers[0] = points[first]
    closest = ((points - centers[0]) ** 2).sum(axis=1)
    chosen = {first}
    for c in range(1, k):
        pot = closest.sum()
        if pot <= 0:
            # all remaining points coincide with a center: take the lowest unused index
            idx = next(i for i in range(n) if i not in chosen)
            cand = [idx]
        else:
            cum = np.cumsum(closest)
            draws = rng.random(trials) * cum[-1]
            cand = np.minimum(np.searchsorted(cum, draws, side="right"), n - 1).tolist()
        best_idx, best_pot, best_closest = None, math.inf, None
        for idx in cand:
            d = np.minimum(closest, ((points - points[idx]) ** 2).sum(axis=1))
            p = d.sum()
            if p < best_pot:
                best_idx, best_pot, best_closest = idx, p, d
        centers[c] = points[best_idx]
        closest = best_closest
        chosen.add(best_idx)
    return centers


def kmeans(points, k, max_iters=100, seed=0, history=None):
    """Lloyd's algorithm from a seeded greedy k-means++ start.

    Returns ``(assignments, centroids)``. Ties in assignment go to the lowest
    centroid index. A centroid left without members is moved onto the point
    farthest from its current centroid, so every cluster is non-empty. If
    ``history`` is a list, the objective after each assignment is appended.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] == 0:
        raise DomainError("kmeans needs a non-empty 2-D array of points")
    n = points.shape[0]
    if k < 1 or k > n:
        raise DomainError(f"k must be in [1, {n}], got {k}")
    rng = np.random.default_rng(seed)
    centroids = _kmeanspp_init(points, k, rng)
    labels, d2 = kernels.kmeans_assign(points, centroids)
    if history is not None:
        history.append(float(d2.sum()))
    for _ in range(max_iters):
        counts = np.bincount(labels, minlength=k)
        sums = np.zeros_like(centroids)
        np.add.at(sums, labels, points)
        new_centroids = centroids.copy()
        live = counts > 0
        new_centroids[live] = sums[live] / counts[live, None]
        for c in np.flatnonzero(~live):
            far = int(np.argmax(d2))
            new_centroids[c] = points[far]
            d2[far] = 0.0
        new_labels, new_d2 = kernels.kmeans_assign(points, new_centroids)
        if history is not None:
            history.append(float(new_d2.sum()))
        centroids = new_centroids
        if np.array_equal(new_labels, labels) and live.all():
            labels, d2 = new_labels, new_d2
            break
        labels, d2 = new_labels, new_d2
    return labels, centroids


def cluster_stats(sizes):
    """Mean cluster size and squared coefficient of variation (population convention)."""
    sizes = np.asarray(sizes, dtype=np.float64)
    if sizes.size == 0:
        raise DomainError("cluster_stats needs at least one cluster")
    if np.any(sizes <= 0):
        raise DomainError("cluster sizes must be positive")
    mean = sizes.mean()
    cv2 = float(np.mean((sizes - mean) ** 2) / mean**2)
    return float(mean), cv2


def build_clusters(ids, ifd, embeddings, bin_width=0.1, num_bins=10, num_task_clusters=4, seed=0,
                   max_iters=100):
    """Difficulty bins, each split into at most ``num_task_clusters`` k-means task clusters."""
    ids = np.asarray(ids, dtype=np.int64)
    embeddings = np.asarray(embeddings, dtype=np.float64)
    if num_task_clusters < 1:
        raise DomainError("num_task_clusters must be >= 1")
    pos = {int(i): p for p, i in enumerate(ids)}
    if len(pos) != len(ids):
        raise DomainError("sample ids must be unique")
    bins = bin_by_difficulty(ids, ifd, bin_width, num_bins)
    for dc in bins:
        rows = np.fromiter((pos[int(i)] for i in dc.member_ids), dtype=np.int64, count=dc.size)
        m = min(num_task_clusters, dc.size)
        labels, centroids = kmeans(embeddings[rows], m, max_iters=max_iters, seed=seed + dc.index)
        dc.task_clusters = [
            TaskCluster(index=c, member_ids=dc.member_ids[labels == c], centroid=centroids[c])
            for c in range(m)
        ]
    return bins


def assignment_table(bins):
    """Flatten clusters to ``(ids, difficulty_bin, task_cluster)`` arrays sorted by id."""
    ids, dbin, tcl = [], [], []
    for dc in bins:
        for tc in dc.task_clusters:
            ids.append(tc.member_ids)
            dbin.append(np.full(tc.size, dc.index))
            tcl.append(np.full(tc.size, tc.index))
    ids = np.concatenate(ids)
    order = np.argsort(ids, kind="stable")
    return ids[order], np.concatenate(dbin)[order], np.concatenate(tcl)[order]
