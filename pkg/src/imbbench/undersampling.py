"""Undersampling methods.

Prototype-selection methods return a row subset of the input in the original
row order; minority rows are never removed. ``cluster_centroids`` is the one
prototype-generation method: it replaces the majority class by k-means
centroids.

Neighbour searches always exclude the query sample itself (by row identity)
and run over the full current set, minority included.
"""

from __future__ import annotations

import math
import warnings

import numpy as np

from .dataset import MAJORITY, MINORITY, LabeledDataset
from .errors import ResampleError, ResampleWarning
from .learners import kmeans_fit
from .neighbors import NeighborIndex, euclidean

ENN_MODES = ("single", "repeated", "all_knn")
ENN_CRITERIA = ("mode", "all")


def _keep(d: LabeledDataset, keep_mask) -> LabeledDataset:
    out = d.subset(np.flatnonzero(keep_mask))
    if out.n_majority == 0:
        warnings.warn("undersampling removed every majority sample", ResampleWarning, stacklevel=3)
    return out


def n_majority_to_keep(d: LabeledDataset, target_ratio: float) -> int:
    d.require_both_classes()
    n_keep = math.ceil(d.n_minority / target_ratio - 1e-9)
    if n_keep > d.n_majority:
        raise ResampleError(
            f"target_ratio {target_ratio} needs {n_keep} majority rows but only "
            f"{d.n_majority} exist"
        )
    return n_keep


def random_undersample(d: LabeledDataset, target_ratio: float = 1.0, seed: int = 0) -> LabeledDataset:
    if not 0 < target_ratio <= 1:
        raise ResampleError(f"target_ratio must be in (0, 1], got {target_ratio}")
    n_keep = n_majority_to_keep(d, target_ratio)
    rng = np.random.default_rng(seed)
    maj_rows = np.flatnonzero(d.labels == MAJORITY)
    keep = d.labels == MINORITY
    keep[rng.choice(maj_rows, size=n_keep, replace=False)] = True
    return _keep(d, keep)


def condensed_nn(d: LabeledDataset, n_seeds: int = 1, seed: int = 0) -> LabeledDataset:
    """Hart's condensing with all minority rows plus ``n_seeds`` majority rows as the start.

    Majority rows misclassified by 1-NN on the current store are moved into
    it; passes repeat until one moves nothing. A row whose nearest store
    points are tied and carry more than one label counts as misclassified,
    so coinciding cross-class points all end up in the store.
    """
    d.require_both_classes()
    rng = np.random.default_rng(seed)
    X, y = d.features, d.labels
    maj_rows = np.flatnonzero(y == MAJORITY)
    seeds = rng.choice(maj_rows, size=min(max(n_seeds, 1), len(maj_rows)), replace=False)
    in_store = y == MINORITY
    in_store[seeds] = True

    # Growing store buffer.
    store_rows = list(np.flatnonzero(in_store))
    buf = np.empty((d.n_samples, d.n_features))
    buf[: len(store_rows)] = X[store_rows]
    rows_buf = np.empty(d.n_samples, dtype=np.int64)
    rows_buf[: len(store_rows)] = store_rows
    size = len(store_rows)

    remaining = np.setdiff1d(maj_rows, seeds)
    while True:
        moved = False
        for i in rng.permutation(remaining):
            if in_store[i]:
                continue
            dist = euclidean(X[i], buf[:size])
            best = dist.min()
            tied = rows_buf[:size][dist == best]
            if (y[tied] != y[i]).any():
                in_store[i] = True
                buf[size] = X[i]
                rows_buf[size] = i
                size += 1
                moved = True
        if not moved:
            break
        remaining = remaining[~in_store[remaining]]
    return _keep(d, in_store)


def _enn_failing(d: LabeledDataset, k: int, criterion: str) -> np.ndarray:
    """Majority rows whose k-neighbourhood disagrees with their label."""
    if k > d.n_samples - 1:
        return np.zeros(d.n_samples, dtype=bool)
    maj_rows = np.flatnonzero(d.labels == MAJORITY)
    if len(maj_rows) == 0:
        return np.zeros(d.n_samples, dtype=bool)
    idx, _ = NeighborIndex(d.features).query(d.features[maj_rows], k, exclude=maj_rows)
    n_min = (d.labels[idx] == MINORITY).sum(axis=1)
    if criterion == "mode":
        bad = n_min > k - n_min
    else:
        bad = n_min > 0
    out = np.zeros(d.n_samples, dtype=bool)
    out[maj_rows[bad]] = True
    return out


def edited_nn(d: LabeledDataset, k_neighbors: int = 3, criterion: str = "mode",
              mode: str = "single", max_iter: int = 100) -> LabeledDataset:
    """Wilson editing (``single``), its repetition (``repeated``) and All-kNN (``all_knn``).

    ``repeated`` stops at a fixpoint, after ``max_iter`` rounds, or before a
    round that would leave fewer majority than minority rows.
    """
    d.require_both_classes()
    if criterion not in ENN_CRITERIA:
        raise ResampleError(f"criterion must be one of {ENN_CRITERIA}, got {criterion!r}")
    if k_neighbors > d.n_samples - 1:
        raise ResampleError(f"k_neighbors={k_neighbors} exceeds n - 1 = {d.n_samples - 1}")
    rows = np.arange(d.n_samples)
    cur = d
    if mode == "single":
        keep = ~_enn_failing(cur, k_neighbors, criterion)
        return _keep(d, keep)
    if mode == "repeated":
        for _ in range(max_iter):
            bad = _enn_failing(cur, k_neighbors, criterion)
            if not bad.any():
                break
            if cur.n_majority - int(bad.sum()) < cur.n_minority:
                break
            rows = rows[~bad]
            cur = d.subset(rows)
    elif mode == "all_knn":
        for k in range(1, k_neighbors + 1):
            bad = _enn_failing(cur, k, criterion)
            rows = rows[~bad]
            cur = d.subset(rows)
    else:
        raise ResampleError(f"mode must be one of {ENN_MODES}, got {mode!r}")
    keep = np.zeros(d.n_samples, dtype=bool)
    keep[rows] = True
    return _keep(d, keep)


def near_miss(d: LabeledDataset, version: int = 1, k_neighbors: int = 3,
              target_ratio: float = 1.0, seed: int = 0) -> LabeledDataset:
    """NearMiss-1/2/3 majority selection.

    * v1: keep majority rows with the smallest mean distance to their k nearest minority rows.
    * v2: same, against their k farthest minority rows.
    * v3: pool the k nearest majority rows of every minority row, then keep the pool
      members with the *largest* mean distance to their k nearest minority rows.

    Ties in the score are broken by lower row index. ``seed`` is accepted for
    interface symmetry; the selection is deterministic.
    """
    if version not in (1, 2, 3):
        raise ResampleError(f"NearMiss version must be 1, 2 or 3, got {version}")
    n_keep = n_majority_to_keep(d, target_ratio)
    k = k_neighbors
    if k > d.n_minority:
        raise ResampleError(f"k_neighbors={k} exceeds n_minority={d.n_minority}")
    maj_rows = np.flatnonzero(d.labels == MAJORITY)
    X_maj, X_min = d.features[maj_rows], d.minority
    min_index = NeighborIndex(X_min)

    if version == 1:
        _, dist = min_index.query(X_maj, k)
        chosen = _lowest(dist.mean(axis=1), n_keep)
    elif version == 2:
        far = _k_farthest_mean(X_maj, X_min, k)
        chosen = _lowest(far, n_keep)
    else:
        if k > len(maj_rows):
            raise ResampleError(f"k_neighbors={k} exceeds n_majority={len(maj_rows)}")
        pool_idx, _ = NeighborIndex(X_maj).query(X_min, k)
        pool = np.unique(pool_idx)
        _, dist = min_index.query(X_maj[pool], k)
        score = dist.mean(axis=1)
        if len(pool) <= n_keep:
            if len(pool) < n_keep:
                warnings.warn(
                    f"NearMiss-3 pool holds {len(pool)} majority rows, fewer than the "
                    f"{n_keep} requested", ResampleWarning, stacklevel=2,
                )
            chosen = pool
        else:
            chosen = pool[_lowest(-score, n_keep)]
    keep = d.labels == MINORITY
    keep[maj_rows[chosen]] = True
    return _keep(d, keep)


def _lowest(score, n):
    return np.lexsort((np.arange(len(score)), score))[:n]


def _k_farthest_mean(A, B, k):
    out = np.empty(len(A))
    chunk = max(1, 2**22 // max(1, len(B) * max(A.shape[1], 1)))
    for s in range(0, len(A), chunk):
        D = euclidean(A[s : s + chunk, None, :], B[None, :, :])
        part = -np.partition(-D, k - 1, axis=1)[:, :k]
        out[s : s + chunk] = part.mean(axis=1)
    return out


def tomek_link_pairs(d: LabeledDataset) -> list[tuple[int, int]]:
    """``(minority_row, majority_row)`` pairs that are mutual strict nearest neighbours."""
    n = d.n_samples
    if n < 2:
        return []
    k = 2 if n > 2 else 1
    idx, dist = NeighborIndex(d.features).query_self(k)
    nn = idx[:, 0]
    unique = np.ones(n, dtype=bool) if k == 1 else dist[:, 0] < dist[:, 1]
    pairs = []
    for i in np.flatnonzero(d.labels == MINORITY):
        j = nn[i]
        if d.labels[j] == MAJORITY and unique[i] and unique[j] and nn[j] == i:
            pairs.append((int(i), int(j)))
    return pairs


def tomek_links(d: LabeledDataset) -> LabeledDataset:
    d.require_both_classes()
    keep = np.ones(d.n_samples, dtype=bool)
    for _, j in tomek_link_pairs(d):
        keep[j] = False
    return _keep(d, keep)


def one_sided_selection(d: LabeledDataset, n_seeds: int = 1, seed: int = 0) -> LabeledDataset:
    condensed = condensed_nn(d, n_seeds=n_seeds, seed=seed)
    if condensed.n_majority == 0:
        return condensed
    return tomek_links(condensed)


def ncl(d: LabeledDataset, k_neighbors: int = 3, criterion: str = "mode",
        cleaning_threshold: float = 0.5) -> LabeledDataset:
    """Neighbourhood cleaning rule.

    Phase one edits the majority with single-pass ENN. Phase two looks at the
    3 nearest neighbours of every minority row; when most of them are
    majority, those majority neighbours are removed, provided the majority
    class holds at least ``cleaning_threshold * n_minority`` rows. Both phases
    are computed on the input set and their removals combined.
    """
    d.require_both_classes()
    remove = _enn_failing(d, k_neighbors, criterion)
    if d.n_majority >= cleaning_threshold * d.n_minority and d.n_samples > 3:
        min_rows = np.flatnonzero(d.labels == MINORITY)
        idx, _ = NeighborIndex(d.features).query(d.features[min_rows], 3, exclude=min_rows)
        is_maj = d.labels[idx] == MAJORITY
        misclassified = is_maj.sum(axis=1) >= 2
        remove[idx[misclassified][is_maj[misclassified]]] = True
    return _keep(d, ~remove)


def cluster_centroids(d: LabeledDataset, target_ratio: float = 1.0, seed: int = 0,
                      n_restarts: int = 1) -> LabeledDataset:
    """Replace the majority class by ``ceil(n_minority / target_ratio)`` k-means centroids.

    Output rows: the centroids (majority) followed by the original minority rows.
    """
    n_keep = n_majority_to_keep(d, target_ratio)
    km = kmeans_fit(d.majority, n_keep, seed=seed, n_restarts=n_restarts)
    X = np.vstack([km.centroids, d.minority])
    y = np.concatenate([np.full(n_keep, MAJORITY), np.full(d.n_minority, MINORITY)])
    return d.with_rows(X, y)


UNDERSAMPLERS = {
    "random_undersampling": random_undersample,
    "cnn": condensed_nn,
    "enn": edited_nn,
    "repeated_enn": edited_nn,
    "all_knn": edited_nn,
    "near_miss": near_miss,
    "tomek_links": tomek_links,
    "one_sided_selection": one_sided_selection,
    "ncl": ncl,
    "cluster_centroids": cluster_centroids,
}
