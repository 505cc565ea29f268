"""Exact Euclidean k-nearest-neighbour search.

Results are deterministic: neighbours are ordered by distance, ties by lower
row index. The brute-force scan is the reference; the KD-tree path is only an
accelerator and returns exactly the same index sets.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

# Above this many points (and at or below _KD_MAX_DIM features) queries use the tree.
_KD_MIN_POINTS = 1024
_KD_MAX_DIM = 10
# Bytes of scratch memory a brute-force chunk may use.
_CHUNK_BYTES = 32 * 2**20


def euclidean(a, b) -> np.ndarray:
    """Distance between broadcast-compatible point arrays along the last axis."""
    diff = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    return np.sqrt(np.einsum("...i,...i->...", diff, diff))


class NeighborIndex:
    """Immutable point set answering exact k-NN queries.

    Parameters
    ----------
    points : array of shape (m, d)
    algorithm : {"auto", "brute", "kd_tree"}
    """

    def __init__(self, points, algorithm: str = "auto"):
        P = np.array(points, dtype=np.float64, copy=True)
        if P.ndim == 1:
            P = P.reshape(-1, 1)
        if P.ndim != 2 or P.shape[0] == 0:
            raise ValueError("NeighborIndex needs at least one point")
        if algorithm not in ("auto", "brute", "kd_tree"):
            raise ValueError(f"unknown algorithm {algorithm!r}")
        if algorithm == "auto":
            use_tree = P.shape[0] > _KD_MIN_POINTS and 0 < P.shape[1] <= _KD_MAX_DIM
            algorithm = "kd_tree" if use_tree else "brute"
        P.setflags(write=False)
        self.points = P
        self.algorithm = algorithm
        self._tree = cKDTree(P) if algorithm == "kd_tree" else None

    def __len__(self):
        return self.points.shape[0]

    def query(self, queries, k: int, exclude=None):
        """k nearest indexed points for every query row.

        ``exclude`` optionally gives, per query, an indexed row id to skip
        (self-exclusion by identity); use -1 for "none".

        Returns ``(indices, distances)``, both of shape (n_queries, k).
        """
        Q = np.asarray(queries, dtype=np.float64)
        if Q.ndim == 1:
            Q = Q.reshape(1, -1)
        if Q.shape[1] != self.points.shape[1]:
            raise ValueError(
                f"query dimension {Q.shape[1]} != index dimension {self.points.shape[1]}"
            )
        m = len(self)
        if exclude is None:
            excl = np.full(len(Q), -1, dtype=np.int64)
        else:
            excl = np.asarray(exclude, dtype=np.int64).reshape(-1)
            if len(excl) != len(Q):
                raise ValueError("exclude must have one entry per query")
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        available = m - (1 if (excl >= 0).any() else 0)
        if k > available:
            raise ValueError(f"k={k} exceeds the {available} available candidates (m={m})")
        if len(Q) == 0:
            return np.empty((0, k), np.int64), np.empty((0, k))
        if self._tree is not None:
            return self._query_tree(Q, k, excl)
        return self._query_brute(Q, k, excl)

    def query_self(self, k: int):
        """k nearest neighbours of every indexed point, excluding the point itself."""
        return self.query(self.points, k, exclude=np.arange(len(self)))

    def _query_brute(self, Q, k, excl):
        m, d = self.points.shape
        chunk = max(1, _CHUNK_BYTES // (8 * m * max(d, 1)))
        out_idx = np.empty((len(Q), k), dtype=np.int64)
        out_dist = np.empty((len(Q), k))
        for s in range(0, len(Q), chunk):
            D = euclidean(Q[s : s + chunk, None, :], self.points[None, :, :])
            rows = np.arange(D.shape[0])
            e = excl[s : s + chunk]
            has = e >= 0
            D[rows[has], e[has]] = np.inf
            idx, dist = _smallest_k(D, k)
            out_idx[s : s + chunk] = idx
            out_dist[s : s + chunk] = dist
        return out_idx, out_dist

    def _query_tree(self, Q, k, excl):
        kk = min(k + 1, len(self))
        approx, _ = self._tree.query(Q, k=kk)
        approx = np.asarray(approx).reshape(len(Q), -1)
        radius = approx[:, -1] * (1 + 1e-9) + 1e-300
        out_idx = np.empty((len(Q), k), dtype=np.int64)
        out_dist = np.empty((len(Q), k))
        for i, q in enumerate(Q):
            cand = np.fromiter(
                self._tree.query_ball_point(q, radius[i]), dtype=np.int64
            )
            if excl[i] >= 0:
                cand = cand[cand != excl[i]]
            if len(cand) < k:
                # Rounding in the tree's distances; fall back to a full scan.
                idx, dist = self._query_brute(q[None, :], k, excl[i : i + 1])
                out_idx[i], out_dist[i] = idx[0], dist[0]
                continue
            dist = euclidean(q, self.points[cand])
            order = np.lexsort((cand, dist))[:k]
            out_idx[i] = cand[order]
            out_dist[i] = dist[order]
        return out_idx, out_dist


def _smallest_k(D, k):
    """Row-wise k smallest entries ordered by (distance, column index)."""
    n, m = D.shape
    rows = np.arange(n)[:, None]
    if k < m:
        part = np.argpartition(D, k - 1, axis=1)[:, :k]
        kth = D[rows, part].max(axis=1)
        clean = (D <= kth[:, None]).sum(axis=1) == k
    else:
        part = np.broadcast_to(np.arange(m), (n, m)).copy()
        clean = np.ones(n, dtype=bool)
    idx = np.empty((n, k), dtype=np.int64)
    if clean.any():
        p = part[clean]
        dp = D[clean][np.arange(len(p))[:, None], p]
        order = _rowwise_lexsort(p, dp)
        idx[clean] = np.take_along_axis(p, order, axis=1)
    if (~clean).any():
        # Ties straddle the k-th position; a stable full sort resolves them by index.
        idx[~clean] = np.argsort(D[~clean], axis=1, kind="stable")[:, :k]
    return idx, D[rows, idx]


def _rowwise_lexsort(p, dp):
    # Sorting by index first, then stably by distance, orders ties by index.
    by_index = np.argsort(p, axis=1, kind="stable")
    dp_sorted = np.take_along_axis(dp, by_index, axis=1)
    by_dist = np.argsort(dp_sorted, axis=1, kind="stable")
    return np.take_along_axis(by_index, by_dist, axis=1)


def build_index(points, algorithm: str = "auto") -> NeighborIndex:
    return NeighborIndex(points, algorithm=algorithm)


def knn_query(index: NeighborIndex, query, k: int, self_index: int | None = None):
    """k nearest neighbours of a single point as a list of ``(row, distance)``.

    ``self_index`` names the indexed row the query *is*, which is then skipped.
    Exclusion is by identity, so exact duplicates of the query still count.
    """
    excl = None if self_index is None else [int(self_index)]
    idx, dist = index.query(np.asarray(query, dtype=np.float64).reshape(1, -1), k, exclude=excl)
    return [(int(i), float(dd)) for i, dd in zip(idx[0], dist[0])]

