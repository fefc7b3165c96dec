"""Shared test oracles and instance generators.

The brute-force routines here are written independently of the package
internals on purpose: distances via a dense matrix, ordering via a stable
argsort (which realizes the smaller-id tie rule).
"""

import numpy as np

from matchkit.data import CausalDataset, PointSet


def brute_knn(points, q, k):
    """Reference k-NN: stable sort of squared distances."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    q = np.asarray(q, dtype=float).reshape(1, -1)
    d2 = ((pts - q) ** 2).sum(axis=1)
    order = np.argsort(d2, kind="stable")[:k]
    return order, np.sqrt(d2[order])


def brute_counts(x, z, m):
    """Reference match counts: occurrence counts over per-query M-NN sets."""
    xv = np.asarray(x, dtype=float)
    zv = np.asarray(z, dtype=float)
    if xv.ndim == 1:
        xv = xv.reshape(-1, 1)
    if zv.ndim == 1:
        zv = zv.reshape(-1, 1)
    counts = np.zeros(len(xv), dtype=np.int64)
    for zj in zv:
        ids, _ = brute_knn(xv, zj, m)
        counts[ids] += 1
    return counts


def random_two_sample(rng, max_n=200, max_d=5, max_m=20):
    d = int(rng.integers(1, max_d + 1))
    n0 = int(rng.integers(2, max_n + 1))
    n1 = int(rng.integers(1, max_n + 1))
    m = int(rng.integers(1, min(max_m, n0) + 1))
    x = PointSet(rng.normal(size=(n0, d)))
    z = PointSet(rng.normal(size=(n1, d)))
    return x, z, m


def tied_two_sample(rng, max_n=40, max_d=3, max_m=8):
    """Integer coordinates on a tiny grid: exact-distance ties abound."""
    d = int(rng.integers(1, max_d + 1))
    n0 = int(rng.integers(2, max_n + 1))
    n1 = int(rng.integers(1, max_n + 1))
    m = int(rng.integers(1, min(max_m, n0) + 1))
    x = PointSet(rng.integers(0, 4, size=(n0, d)).astype(float))
    z = PointSet(rng.integers(0, 4, size=(n1, d)).astype(float))
    return x, z, m


def random_causal(rng, max_n=120, max_d=3):
    d = int(rng.integers(1, max_d + 1))
    while True:
        n = int(rng.integers(8, max_n + 1))
        treat = rng.integers(0, 2, size=n)
        if 2 <= treat.sum() <= n - 2:
            break
    x = rng.normal(size=(n, d))
    y = rng.normal(size=n)
    return CausalDataset(covariates=PointSet(x), treatments=treat, outcomes=y)
