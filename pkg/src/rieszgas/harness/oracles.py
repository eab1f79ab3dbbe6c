"""Independent reference computations used to cross-check library results."""
from __future__ import annotations

import numpy as np


def min_cost_assignment(cost: np.ndarray) -> np.ndarray:
    """Hungarian algorithm with row/column potentials, ``O(n^3)``.

    Returns ``perm`` with row ``i`` assigned to column ``perm[i]`` minimizing
    the total cost of a square matrix.
    """
    a = np.asarray(cost, float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("cost matrix must be square")
    inf = np.inf
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    match = np.zeros(n + 1, dtype=int)  # match[j] = row (1-based) assigned to column j; 0 = free
    way = np.zeros(n + 1, dtype=int)
    for i in range(1, n + 1):
        match[0] = i
        j0 = 0
        minv = np.full(n + 1, inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = match[j0]
            delta = inf
            j1 = 0
            for j in range(1, n + 1):
                if not used[j]:
                    cur = a[i0 - 1, j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[match[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if match[j0] == 0:
                break
        while True:
            j1 = way[j0]
            match[j0] = match[j1]
            j0 = j1
            if j0 == 0:
                break
    perm = np.empty(n, dtype=int)
    for j in range(1, n + 1):
        perm[match[j] - 1] = j - 1
    return perm


def matching_w1(x: np.ndarray, y: np.ndarray) -> float:
    """Wasserstein-1 distance between uniform measures on equally many points ``x`` and ``y``."""
    x = np.atleast_2d(np.asarray(x, float))
    y = np.atleast_2d(np.asarray(y, float))
    if x.shape != y.shape:
        raise ValueError("point sets must have the same shape")
    cost = np.sqrt(np.sum((x[:, None, :] - y[None, :, :]) ** 2, axis=-1))
    perm = min_cost_assignment(cost)
    return float(cost[np.arange(len(x)), perm].mean())
