"""Exact k-d tree with k-NN queries and incremental nearest-neighbor streaming.

The tree is balanced by construction: split dimensions cycle with depth and
each internal node splits its points at the median position. Queries are
exact under the Euclidean norm with distance ties broken by smaller point id,
so results are reproducible and equal to a brute-force sort of distances.

Distances are compared as squared Euclidean doubles throughout; square roots
are taken only for reported distances.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from math import sqrt

import numpy as np

from .data import PointSet
from .errors import DimensionMismatch, EmptySample, InvalidK

DEFAULT_LEAF_SIZE = 16


@dataclass(frozen=True)
class NeighborList:
    """Neighbors in ascending (distance, point_id) order."""

    ids: np.ndarray
    distances: np.ndarray

    def __len__(self) -> int:
        return len(self.ids)

    def __iter__(self):
        return iter(zip(self.ids.tolist(), self.distances.tolist()))


class KdTree:
    """Immutable spatial index over a PointSet.

    Nodes are stored in flat arrays; leaves hold index ranges into a
    permuted copy of the points for cache-friendly scans. The leaf bucket
    size affects speed only, never results.
    """

    def __init__(self, points: PointSet, leaf_size: int = DEFAULT_LEAF_SIZE):
        if points.n == 0:
            raise EmptySample("cannot build an index over an empty sample")
        if leaf_size < 1:
            raise ValueError("leaf_size must be >= 1")
        self.source = points
        self.n = points.n
        self.d = points.d
        self._build(points.points, leaf_size)

    def _build(self, xv: np.ndarray, leaf_size: int) -> None:
        n, d = xv.shape
        ids = np.arange(n, dtype=np.int64)

        split_dim: list[int] = []
        split_val: list[float] = []
        left: list[int] = []
        right: list[int] = []
        start: list[int] = []
        count: list[int] = []
        mins: list[np.ndarray] = []
        maxs: list[np.ndarray] = []

        max_depth = 0
        # stack entries: (start, end, depth, parent, is_right_child)
        stack = [(0, n, 1, -1, False)]
        while stack:
            s, e, depth, parent, is_right = stack.pop()
            node = len(split_dim)
            if parent >= 0:
                if is_right:
                    right[parent] = node
                else:
                    left[parent] = node
            max_depth = max(max_depth, depth)
            seg = ids[s:e]
            pts_seg = xv[seg]
            mins.append(pts_seg.min(axis=0))
            maxs.append(pts_seg.max(axis=0))
            if e - s <= leaf_size:
                split_dim.append(-1)
                split_val.append(0.0)
                left.append(-1)
                right.append(-1)
                start.append(s)
                count.append(e - s)
                continue
            axis = (depth - 1) % d
            mid = (e - s) // 2
            order = np.argpartition(pts_seg[:, axis], mid)
            ids[s:e] = seg[order]
            sv = float(xv[ids[s + mid], axis])
            split_dim.append(axis)
            split_val.append(sv)
            left.append(-1)
            right.append(-1)
            start.append(s)
            count.append(e - s)
            stack.append((s + mid, e, depth + 1, node, True))
            stack.append((s, s + mid, depth + 1, node, False))

        self._ids = ids
        self._pts = np.ascontiguousarray(xv[ids])
        self._split_dim = np.asarray(split_dim, dtype=np.int64)
        self._split_val = np.asarray(split_val)
        self._left = np.asarray(left, dtype=np.int64)
        self._right = np.asarray(right, dtype=np.int64)
        self._start = np.asarray(start, dtype=np.int64)
        self._count = np.asarray(count, dtype=np.int64)
        self._mins = np.asarray(mins)
        self._maxs = np.asarray(maxs)
        # python-level copies keep the query hot loop off numpy scalar overhead
        self._mins_l = self._mins.tolist()
        self._maxs_l = self._maxs.tolist()
        self._left_l = left
        self._right_l = right
        self._start_l = start
        self._count_l = count
        self._ids_l = ids.tolist()
        self.depth = max_depth

    def _check_query(self, query) -> np.ndarray:
        q = np.asarray(query, dtype=np.float64).reshape(-1)
        if q.shape[0] != self.d:
            raise DimensionMismatch(
                f"query has dimension {q.shape[0]}, index has d={self.d}"
            )
        return q

    def _box_d2(self, node: int, q: list[float]) -> float:
        lo = self._mins_l[node]
        hi = self._maxs_l[node]
        s = 0.0
        for i in range(self.d):
            qi = q[i]
            li = lo[i]
            if qi < li:
                t = li - qi
            else:
                hi_i = hi[i]
                if qi > hi_i:
                    t = qi - hi_i
                else:
                    continue
            s += t * t
        return s

    def _knn_pairs(self, q: np.ndarray, k: int) -> list[tuple[float, int]]:
        """Exact k nearest as a list of (squared_distance, id), ascending."""
        ql = q.tolist()
        pts = self._pts
        ids_l = self._ids_l
        left_l = self._left_l
        right_l = self._right_l
        start_l = self._start_l
        count_l = self._count_l
        box_d2 = self._box_d2
        heappush = heapq.heappush
        heappop = heapq.heappop
        heapreplace = heapq.heapreplace

        nodes = [(box_d2(0, ql), 0)]
        best: list[tuple[float, int]] = []  # (-d2, -id) max-heap via heapq
        full = False
        worst_d2 = np.inf
        worst_nid = np.inf  # -id of current worst; larger -id == smaller id
        while nodes:
            lb, node = heappop(nodes)
            if full and lb > worst_d2:
                break
            l = left_l[node]
            if l < 0:
                s = start_l[node]
                e = s + count_l[node]
                diff = pts[s:e] - q
                d2s = (diff * diff).sum(axis=1).tolist()
                for off, d2 in enumerate(d2s):
                    if not full:
                        heappush(best, (-d2, -ids_l[s + off]))
                        if len(best) == k:
                            full = True
                            worst_d2 = -best[0][0]
                            worst_nid = best[0][1]
                    elif d2 < worst_d2 or (
                        d2 == worst_d2 and -ids_l[s + off] > worst_nid
                    ):
                        heapreplace(best, (-d2, -ids_l[s + off]))
                        worst_d2 = -best[0][0]
                        worst_nid = best[0][1]
            else:
                r = right_l[node]
                lb_l = box_d2(l, ql)
                lb_r = box_d2(r, ql)
                if not full or lb_l <= worst_d2:
                    heappush(nodes, (lb_l, l))
                if not full or lb_r <= worst_d2:
                    heappush(nodes, (lb_r, r))
        out = sorted((-nd2, -nid) for nd2, nid in best)
        return out

    def knn(self, query, k: int) -> NeighborList:
        """The exact k nearest neighbors of ``query``, ties to smaller id."""
        q = self._check_query(query)
        k = int(k)
        if k < 1 or k > self.n:
            raise InvalidK(f"k must be in [1, {self.n}], got {k}")
        pairs = self._knn_pairs(q, k)
        ids = np.fromiter((p[1] for p in pairs), dtype=np.int64, count=len(pairs))
        dists = np.sqrt(np.fromiter((p[0] for p in pairs), dtype=np.float64,
                                    count=len(pairs)))
        return NeighborList(ids=ids, distances=dists)

    def knn_batch(self, queries, k: int) -> tuple[np.ndarray, np.ndarray]:
        """Row-wise knn over a (nq, d) array; returns (ids, squared distances)."""
        qs = np.asarray(queries, dtype=np.float64)
        if qs.ndim == 1:
            qs = qs.reshape(-1, 1)
        if qs.shape[1] != self.d:
            raise DimensionMismatch(
                f"queries have dimension {qs.shape[1]}, index has d={self.d}"
            )
        k = int(k)
        if k < 1 or k > self.n:
            raise InvalidK(f"k must be in [1, {self.n}], got {k}")
        nq = qs.shape[0]
        ids = np.empty((nq, k), dtype=np.int64)
        d2 = np.empty((nq, k))
        for row in range(nq):
            pairs = self._knn_pairs(qs[row], k)
            for col, (pd2, pid) in enumerate(pairs):
                ids[row, col] = pid
                d2[row, col] = pd2
        return ids, d2

    def _stream_pairs_sq(self, query):
        """Yield (squared_distance, point_id) ascending by (distance, id).

        Entries tagged as nodes sort before point entries at equal distance
        so a tied point with a smaller id inside an unexpanded subtree is
        never skipped.
        """
        q = self._check_query(query)
        ql = q.tolist()
        pts = self._pts
        heap: list[tuple[float, int, int]] = [(self._box_d2(0, ql), 0, 0)]
        heappush = heapq.heappush
        heappop = heapq.heappop
        while heap:
            d2, kind, key = heappop(heap)
            if kind == 1:
                yield d2, key
                continue
            l = self._left_l[key]
            if l < 0:
                s = self._start_l[key]
                e = s + self._count_l[key]
                diff = pts[s:e] - q
                d2s = (diff * diff).sum(axis=1).tolist()
                for off, pd2 in enumerate(d2s):
                    heappush(heap, (pd2, 1, self._ids_l[s + off]))
            else:
                r = self._right_l[key]
                heappush(heap, (self._box_d2(l, ql), 0, l))
                heappush(heap, (self._box_d2(r, ql), 0, r))

    def knn_stream(self, query):
        """Yield (point_id, distance) one at a time in ascending (distance, id).

        Consuming j items gives exactly knn(query, j).
        """
        for d2, pid in self._stream_pairs_sq(query):
            yield pid, sqrt(d2)


def build(points: PointSet, leaf_size: int = DEFAULT_LEAF_SIZE) -> KdTree:
    """Build an immutable index over ``points``."""
    return KdTree(points, leaf_size=leaf_size)
