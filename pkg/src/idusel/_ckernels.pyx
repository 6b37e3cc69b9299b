# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot loops in ``_pykernels``."""
import numpy as np

cimport numpy as cnp
from libc.math cimport exp

cnp.import_array()


def kmeans_assign(points, centroids):
    cdef const double[:, ::1] x = np.ascontiguousarray(points, dtype=np.float64)
    cdef const double[:, ::1] c = np.ascontiguousarray(centroids, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0], k = c.shape[0], d = x.shape[1]
    labels_arr = np.empty(n, dtype=np.int64)
    best_arr = np.empty(n, dtype=np.float64)
    cdef cnp.int64_t[::1] labels = labels_arr
    cdef double[::1] best = best_arr
    cdef Py_ssize_t i, j, m, arg
    cdef double acc, diff, low
    for i in range(n):
        low = 0.0
        arg = -1
        for m in range(k):
            acc = 0.0
            for j in range(d):
                diff = x[i, j] - c[m, j]
                acc = acc + diff * diff
            if arg < 0 or acc < low:
                low = acc
                arg = m
        labels[i] = arg
        best[i] = low
    return labels_arr, best_arr


def exp3_rollout(weights, double gamma, supply, uniforms, double epsilon=0.0):
    cdef double[::1] w = np.array(weights, dtype=np.float64)
    cdef const double[::1] sup = np.ascontiguousarray(supply, dtype=np.float64)
    cdef const double[::1] us = np.ascontiguousarray(uniforms, dtype=np.float64)
    cdef Py_ssize_t k = w.shape[0], rounds = us.shape[0]
    chosen_arr = np.empty(rounds, dtype=np.int64)
    cdef cnp.int64_t[::1] chosen = chosen_arr
    cdef double[::1] pending = np.zeros(k, dtype=np.float64)
    cdef double[::1] probs = np.zeros(k, dtype=np.float64)
    cdef Py_ssize_t t, j, arm
    cdef double total, acc, u, raw, reward, share, top
    cdef double r_min = 0.0, r_max = 0.0
    for t in range(rounds):
        total = 0.0
        for j in range(k):
            total = total + w[j]
        for j in range(k):
            probs[j] = (1.0 - gamma) * (w[j] / total) + gamma / k
        u = us[t]
        arm = k - 1
        acc = 0.0
        for j in range(k):
            acc = acc + probs[j]
            if u < acc:
                arm = j
                break
        for j in range(k):
            pending[j] = pending[j] + sup[j]
        raw = pending[arm]
        pending[arm] = 0.0
        if t == 0:
            r_min = raw
            r_max = raw
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
        w[arm] = w[arm] * exp(gamma / k * reward / probs[arm])
        if epsilon > 0.0:
            for j in range(k):
                w[j] = w[j] + share
        top = w[0]
        for j in range(1, k):
            if w[j] > top:
                top = w[j]
        if top > 1e12 or top < 1e-12:
            total = 0.0
            for j in range(k):
                total = total + w[j]
            for j in range(k):
                w[j] = w[j] / total
        chosen[t] = arm
    return chosen_arr, np.asarray(w).copy()
