"""Match-count statistics: how often each point is among the M nearest
neighbors of points from the other sample.

Three interchangeable exact backends sit behind the public operations:

* ``kdtree``   -- the toolkit's own spatial index, searching the M-NNs of
  every query and occurrence-counting the index sets (the advertised
  sub-quadratic path, also used by the scaling benchmark);
* ``sorted1d`` -- a sliding-window computation over sorted values, d=1 only;
* ``scipy``    -- cKDTree preselection with local verification of the
  candidate distances, used by the Monte Carlo harness for throughput;
* ``brute``    -- direct distance sort, size-guarded, kept as the oracle.

All backends compare squared Euclidean distances as computed doubles and
break exact ties by smaller point id, so their outputs are identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .data import PointSet, validate_two_sample, validate_causal, CausalDataset
from .errors import DimensionMismatch, InputTooLarge, InvalidM, MalformedInput
from .kdtree import KdTree

BRUTE_GUARD = 10_000
_CHUNK_BUDGET = 2 ** 24  # max elements per temporary distance block


# ---------------------------------------------------------------------------
# data type
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MatchCounts:
    """Per-point match counts K_M plus sample-size metadata.

    ``n0`` is the size of the matched-into sample, ``n1`` the size of the
    matching (query) sample; counts over the matched-into sample always sum
    to ``n1 * m`` exactly.
    """

    counts: np.ndarray
    n0: int
    n1: int
    m: int

    def __post_init__(self):
        c = np.ascontiguousarray(self.counts, dtype=np.int64)
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)


# ---------------------------------------------------------------------------
# exact nearest-neighbor cores
# ---------------------------------------------------------------------------

def _row_exact(target: np.ndarray, q: np.ndarray, m: int):
    """Exact M-NN set of one query by (squared distance, id); slow path."""
    diff = target - q
    d2 = (diff * diff).sum(axis=1)
    order = np.argsort(d2, kind="stable")
    sel = order[:m]
    return sel, d2[order[m - 1]]


def _core_brute(target, queries, m, need_sets, chunk=None):
    nt = target.shape[0]
    nq = queries.shape[0]
    if chunk is None:
        chunk = max(1, _CHUNK_BUDGET // max(nt, 1))
    sets = np.empty((nq, m), dtype=np.int64) if need_sets else None
    counts = np.zeros(nt, dtype=np.int64)
    r2 = np.empty(nq)
    for s in range(0, nq, chunk):
        e = min(s + chunk, nq)
        block = queries[s:e]
        d2 = ((block[:, None, :] - target[None, :, :]) ** 2).sum(-1)
        order = np.argsort(d2, axis=1, kind="stable")
        sel = order[:, :m]
        r2[s:e] = np.take_along_axis(d2, order[:, m - 1: m], 1)[:, 0]
        if need_sets:
            sets[s:e] = sel
        counts += np.bincount(sel.ravel(), minlength=nt)
    return sets, counts, r2


def _core_scipy(target, queries, m, need_sets):
    nt = target.shape[0]
    nq = queries.shape[0]
    kq = min(m + 1, nt)
    tree = cKDTree(target)
    sets = np.empty((nq, m), dtype=np.int64) if need_sets else None
    counts = np.zeros(nt, dtype=np.int64)
    r2 = np.empty(nq)
    chunk = max(1, _CHUNK_BUDGET // (kq * max(target.shape[1], 1)))
    for s in range(0, nq, chunk):
        e = min(s + chunk, nq)
        block = queries[s:e]
        _, idx = tree.query(block, k=kq)
        idx = idx.reshape(e - s, kq)
        # verify candidate distances locally so all backends share arithmetic
        d2c = ((target[idx] - block[:, None, :]) ** 2).sum(-1)
        d2sorted = np.sort(d2c, axis=1)
        r2[s:e] = d2sorted[:, m - 1]
        sel = np.take_along_axis(idx, np.argsort(d2c, axis=1, kind="stable"), 1)[:, :m]
        if kq > m:
            tied = np.flatnonzero(d2sorted[:, m] <= d2sorted[:, m - 1])
            for row in tied:
                sel_row, r2_row = _row_exact(target, block[row], m)
                sel[row] = sel_row
                r2[s + row] = r2_row
        if need_sets:
            sets[s:e] = sel
        counts += np.bincount(sel.ravel(), minlength=nt)
    return sets, counts, r2


def _core_kdtree(target, queries, m, need_sets):
    tree = KdTree(PointSet(target))
    ids, d2 = tree.knn_batch(queries, m)
    counts = np.bincount(ids.ravel(), minlength=target.shape[0])
    return (ids if need_sets else None), counts, d2[:, m - 1]


def _radii_sorted1d(x: np.ndarray, z: np.ndarray, m: int):
    """M-th NN distance (value space) of each z among sorted-x windows."""
    order = np.argsort(x, kind="stable")
    sx = x[order]
    n0 = len(sx)
    pos = np.searchsorted(sx, z)
    r = np.full(len(z), np.inf)
    hi_lim = n0 - m
    for t in range(m + 1):
        s = np.clip(pos - t, 0, hi_lim)
        width = np.maximum(np.abs(z - sx[s]), np.abs(sx[s + m - 1] - z))
        np.minimum(r, width, out=r)
    return order, sx, r


def _counts_sorted1d(xv, zv, m):
    x = xv[:, 0]
    z = zv[:, 0]
    n0 = len(x)
    n1 = len(z)
    if m == n0:
        # every S_j is the whole sample
        return np.full(n0, n1, dtype=np.int64)
    order, sx, r = _radii_sorted1d(x, z, m)
    lo = np.searchsorted(sx, z - r, side="left")
    hi = np.searchsorted(sx, z + r, side="right")
    clean = (hi - lo) == m
    diff = np.zeros(n0 + 1, dtype=np.int64)
    np.add.at(diff, lo[clean], 1)
    np.add.at(diff, hi[clean], -1)
    counts = np.zeros(n0, dtype=np.int64)
    counts[order] = np.cumsum(diff)[:n0]
    for j in np.flatnonzero(~clean):
        dj = np.abs(x - z[j])
        sel = np.argsort(dj, kind="stable")[:m]
        counts[sel] += 1
    return counts


def _sorted1d_ok(d: int, m: int, nq: int) -> bool:
    return d == 1 and (m + 1) * max(nq, 1) <= 40_000_000


def nn_sets(target: np.ndarray, queries: np.ndarray, m: int,
            method: str = "auto") -> np.ndarray:
    """M-NN index sets of each query row within ``target``, tie rule applied."""
    target = np.asarray(target, dtype=np.float64)
    queries = np.asarray(queries, dtype=np.float64)
    if method == "auto":
        method = "brute" if target.shape[0] * queries.shape[0] <= 4096 else "scipy"
    core = {"brute": _core_brute, "scipy": _core_scipy, "kdtree": _core_kdtree}[method]
    sets, _, _ = core(target, queries, m, need_sets=True)
    return sets


def nn_radii_sq(target: np.ndarray, queries: np.ndarray, m: int,
                method: str = "auto") -> np.ndarray:
    """Squared distance from each query to its M-th NN within ``target``."""
    target = np.asarray(target, dtype=np.float64)
    queries = np.asarray(queries, dtype=np.float64)
    if method == "auto" and _sorted1d_ok(target.shape[1], m, queries.shape[0]):
        _, _, r = _radii_sorted1d(target[:, 0], queries[:, 0], m)
        return r * r
    if method in ("auto", "sorted1d"):
        if method == "sorted1d":
            _, _, r = _radii_sorted1d(target[:, 0], queries[:, 0], m)
            return r * r
        method = "scipy"
    core = {"brute": _core_brute, "scipy": _core_scipy, "kdtree": _core_kdtree}[method]
    _, _, r2 = core(target, queries, m, need_sets=False)
    return r2


def _counts(target: np.ndarray, queries: np.ndarray, m: int, method: str):
    d = target.shape[1]
    if method == "auto":
        if _sorted1d_ok(d, m, queries.shape[0]):
            method = "sorted1d"
        elif target.shape[0] * queries.shape[0] <= 4096:
            method = "brute"
        else:
            method = "scipy"
    if method == "sorted1d":
        if d != 1:
            raise MalformedInput("sorted1d backend requires d == 1")
        return _counts_sorted1d(target, queries, m)
    core = {"brute": _core_brute, "scipy": _core_scipy, "kdtree": _core_kdtree}[method]
    _, counts, _ = core(target, queries, m, need_sets=False)
    return counts


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def match_counts_sample(x: PointSet, z: PointSet, m: int,
                        method: str = "auto") -> MatchCounts:
    """K_M at the sample points: occurrence counts of each X_i over the
    M-NN index sets of all Z_j (density-ratio estimation at sample points)."""
    m = int(m)
    validate_two_sample(x, z, m)
    counts = _counts(x.points, z.points, m, method)
    return MatchCounts(counts=counts, n0=x.n, n1=z.n, m=m)


def match_counts_extended(x: PointSet, z: PointSet, m: int, new_points: PointSet,
                          method: str = "auto") -> tuple[MatchCounts, MatchCounts]:
    """K_M at the sample points and at new points simultaneously.

    The counts restricted to the sample reproduce ``match_counts_sample``
    bit-exactly; a new point is counted by Z_j whenever it is at most as far
    as Z_j's M-th sample NN (sample points rank first on exact ties, so new
    points never displace sample members).
    """
    m = int(m)
    validate_two_sample(x, z, m)
    if new_points.d != x.d:
        raise DimensionMismatch(
            f"new points have d={new_points.d}, samples have d={x.d}"
        )
    if method == "kdtree":
        return _extended_kdtree(x, z, m, new_points)
    counts_x = _counts(x.points, z.points, m, method)
    r2 = nn_radii_sq(x.points, z.points, m,
                     method="auto" if method == "auto" else method)
    counts_new = np.zeros(new_points.n, dtype=np.int64)
    chunk = max(1, _CHUNK_BUDGET // max(z.n, 1))
    zp = z.points
    for s in range(0, new_points.n, chunk):
        e = min(s + chunk, new_points.n)
        d2 = ((new_points.points[s:e, None, :] - zp[None, :, :]) ** 2).sum(-1)
        counts_new[s:e] = (d2 <= r2[None, :]).sum(axis=1)
    k_x = MatchCounts(counts=counts_x, n0=x.n, n1=z.n, m=m)
    k_new = MatchCounts(counts=counts_new, n0=x.n, n1=z.n, m=m)
    return k_x, k_new


def _extended_kdtree(x: PointSet, z: PointSet, m: int, new_points: PointSet):
    """One combined index; stream each Z_j's neighbors until M sample members
    are seen, collecting passed-over new points (plus exact radius ties)."""
    n0 = x.n
    combined = PointSet(np.vstack([x.points, new_points.points]))
    tree = KdTree(combined)
    counts_x = np.zeros(n0, dtype=np.int64)
    counts_new = np.zeros(new_points.n, dtype=np.int64)
    for zj in z.points:
        s_count = 0
        radius_d2 = None
        for d2, pid in tree._stream_pairs_sq(zj):
            if radius_d2 is not None and d2 > radius_d2:
                break
            if pid < n0:
                if s_count < m:
                    counts_x[pid] += 1
                    s_count += 1
                    if s_count == m:
                        radius_d2 = d2
            else:
                counts_new[pid - n0] += 1
    k_x = MatchCounts(counts=counts_x, n0=n0, n1=z.n, m=m)
    k_new = MatchCounts(counts=counts_new, n0=n0, n1=z.n, m=m)
    return k_x, k_new


def match_counts_by_group(ds: CausalDataset, m: int,
                          method: str = "auto") -> tuple[MatchCounts, MatchCounts]:
    """Group-wise match counts (k0 over controls, k1 over treated).

    k1.counts[i] is the number of control units whose M-NN set among the
    treated contains the i-th treated unit; symmetrically for k0.
    """
    m = int(m)
    validate_causal(ds, m)
    xv = ds.covariates.points
    idx_t = ds.group_indices(1)
    idx_c = ds.group_indices(0)
    k1_counts = _counts(xv[idx_t], xv[idx_c], m, method)
    k0_counts = _counts(xv[idx_c], xv[idx_t], m, method)
    k0 = MatchCounts(counts=k0_counts, n0=len(idx_c), n1=len(idx_t), m=m)
    k1 = MatchCounts(counts=k1_counts, n0=len(idx_t), n1=len(idx_c), m=m)
    return k0, k1


def brute_force_match_counts(x: PointSet, z: PointSet, m: int) -> MatchCounts:
    """Direct O(N0*N1) oracle with the same tie rule; inputs size-guarded."""
    m = int(m)
    validate_two_sample(x, z, m)
    if x.n > BRUTE_GUARD or z.n > BRUTE_GUARD:
        raise InputTooLarge(
            f"brute force is guarded to {BRUTE_GUARD} points per sample"
        )
    _, counts, _ = _core_brute(x.points, z.points, m, need_sets=False)
    return MatchCounts(counts=counts, n0=x.n, n1=z.n, m=m)
