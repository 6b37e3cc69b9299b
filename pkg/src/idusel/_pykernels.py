"""Pure-Python/NumPy implementations of the hot loops.

These are the reference versions of the routines in ``_ckernels.pyx``; both
must return identical results for identical inputs.
"""
import math

import numpy as np

# Rows per block when forming point-to-centroid distance matrices.
_CHUNK = 8192


def kmeans_assign(points, centroids):
    """Nearest-centroid labels (ties to the lowest index) and squared distances."""
    points = np.ascontiguousarray(points, dtype=np.float64)
    centroids = np.ascontiguousarray(centroids, dtype=np.float64)
    n = points.shape[0]
    labels = np.empty(n, dtype=np.int64)
    best = np.empty(n, dtype=np.float64)
    for start in range(0, n, _CHUNK):
        block = points[start:start + _CHUNK]
        d2 = np.zeros((block.shape[0], centroids.shape[0]))
        # accumulate per coordinate so the summation order matches the C loop
        for j in range(points.shape[1]):
            diff = block[:, j, None] - centroids[None, :, j]
            d2 += diff * diff
        idx = np.argmin(d2, axis=1)
        labels[start:start + block.shape[0]] = idx
        best[start:start + block.shape[0]] = d2[np.arange(block.shape[0]), idx]
    return labels, best


def exp3_rollout(weights, gamma, supply, uniforms, epsilon=0.0):
    """Run a sampled EXP3 bandit against a replenishing-utility environment.

    Every round each arm's pending utility grows by ``supply[i]``; pulling an
    arm yields its pending utility as the raw reward and resets it to zero.
    Raw rewards are min-max normalized over the run before the weight update.

    Returns (chosen arms per round, final weights).
    """
    w = [float(x) for x in weights]
    k = len(w)
    supply = [float(x) for x in supply]
    pending = [0.0] * k
    chosen = np.empty(len(uniforms), dtype=np.int64)
    r_min = r_max = 0.0
    for t, u in enumerate(uniforms, start=1):
        total = 0.0
        for x in w:
            total += x
        probs = [(1.0 - gamma) * (x / total) + gamma / k for x in w]
        arm = k - 1
        acc = 0.0
        for j in range(k):
            acc += probs[j]
            if u < acc:
                arm = j
                break
        for j in range(k):
            pending[j] += supply[j]
        raw = pending[arm]
        pending[arm] = 0.0
        if t == 1:
            r_min = r_max = raw
            reward = min(1.0, max(-1.0, raw))
        else:
            if raw < r_min:
                r_min = raw
            if raw > r_max:
                r_max = raw
            if r_max == r_min:
                reward = 0.0
            else:
                reward = 2.0 * (raw - r_min) / (r_max - r_min) - 1.0
        share = epsilon / k * total
        w[arm] *= math.exp(gamma / k * reward / probs[arm])
        if epsilon > 0.0:
            for j in range(k):
                w[j] += share
        top = max(w)
        if top > 1e12 or top < 1e-12:
            total = 0.0
            for x in w:
                total += x
            w = [x / total for x in w]
        chosen[t - 1] = arm
    return chosen, np.array(w)
