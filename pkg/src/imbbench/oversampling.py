"""Oversampling methods: random duplication and the SMOTE family.

Every method returns the input rows unchanged and in their original order,
followed by the new minority rows. ``target_ratio`` is the wanted
``n_minority / n_majority`` after resampling; the output holds exactly
``ceil(target_ratio * n_majority)`` minority rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from .dataset import MAJORITY, MINORITY, LabeledDataset
from .errors import ResampleError
from .learners import kmeans_fit, svm_fit
from .neighbors import NeighborIndex

BORDERLINE_KINDS = ("borderline-1", "borderline-2")


@dataclass(frozen=True)
class OversampleParams:
    target_ratio: float = 1.0
    k_neighbors: int = 5
    m_danger_neighbors: int = 10
    kind: str = "borderline-1"
    svm_reg_C: float = 1.0
    n_clusters: int | None = None
    sparsity_exponent: float = 1.0

    def __post_init__(self):
        if not 0 < self.target_ratio <= 1:
            raise ResampleError(f"target_ratio must be in (0, 1], got {self.target_ratio}")
        if self.k_neighbors < 1:
            raise ResampleError(f"k_neighbors must be >= 1, got {self.k_neighbors}")
        if self.kind not in BORDERLINE_KINDS:
            raise ResampleError(f"kind must be one of {BORDERLINE_KINDS}, got {self.kind!r}")


def smote_interpolate(base, neighbor, u):
    """Point at fraction ``u`` along the segment from ``base`` to ``neighbor``."""
    base = np.asarray(base, dtype=np.float64)
    neighbor = np.asarray(neighbor, dtype=np.float64)
    if base.shape != neighbor.shape:
        raise ValueError(f"shape mismatch: {base.shape} vs {neighbor.shape}")
    return base + u * (neighbor - base)


def n_to_generate(d: LabeledDataset, target_ratio: float) -> int:
    d.require_both_classes()
    target = math.ceil(target_ratio * d.n_majority - 1e-9)
    g = target - d.n_minority
    if g < 0:
        raise ResampleError(
            f"target_ratio {target_ratio} asks for {target} minority rows but "
            f"{d.n_minority} already exist; oversampling cannot remove rows"
        )
    return g


def _append(d: LabeledDataset, synthetic: np.ndarray) -> LabeledDataset:
    synthetic = synthetic.reshape(-1, d.n_features)
    X = np.vstack([d.features, synthetic])
    y = np.concatenate([d.labels, np.full(len(synthetic), MINORITY, dtype=np.int64)])
    return d.with_rows(X, y)


def _interpolate_many(rng, points, bases, neighbor_table):
    """One synthetic per entry of ``bases``, toward a uniformly chosen row of ``neighbor_table``."""
    if len(bases) == 0:
        return np.empty((0, points.shape[1]))
    k = neighbor_table.shape[1]
    pick = rng.integers(k, size=len(bases))
    u = rng.random(len(bases))
    nbr = neighbor_table[bases, pick]
    return points[bases] + u[:, None] * (points[nbr] - points[bases])


def _minority_neighbors(X_min, k):
    n_min = len(X_min)
    if n_min < 2:
        raise ResampleError(f"need at least 2 minority samples, got {n_min}")
    if k > n_min - 1:
        raise ResampleError(f"k_neighbors={k} exceeds n_minority - 1 = {n_min - 1}")
    return NeighborIndex(X_min).query_self(k)[0]


def largest_remainder(weights, total: int, priority=None) -> np.ndarray:
    """Integer allocation of ``total`` proportional to ``weights`` that sums exactly to ``total``.

    Leftover units go to the largest fractional parts; ties by ``priority``
    (higher first), then by position.
    """
    w = np.asarray(weights, dtype=np.float64)
    if total == 0:
        return np.zeros(len(w), dtype=np.int64)
    raw = w / w.sum() * total
    base = np.floor(raw).astype(np.int64)
    rem = total - int(base.sum())
    if rem > 0:
        frac = raw - base
        prio = np.zeros(len(w)) if priority is None else np.asarray(priority, dtype=np.float64)
        order = np.lexsort((np.arange(len(w)), -prio, -frac))
        base[order[:rem]] += 1
    return base


def random_oversample(d: LabeledDataset, target_ratio: float = 1.0, seed: int = 0) -> LabeledDataset:
    if not 0 < target_ratio <= 1:
        raise ResampleError(f"target_ratio must be in (0, 1], got {target_ratio}")
    g = n_to_generate(d, target_ratio)
    rng = np.random.default_rng(seed)
    X_min = d.minority
    return _append(d, X_min[rng.integers(len(X_min), size=g)])


def smote(d: LabeledDataset, params: OversampleParams = OversampleParams(), seed: int = 0) -> LabeledDataset:
    g = n_to_generate(d, params.target_ratio)
    X_min = d.minority
    nn = _minority_neighbors(X_min, params.k_neighbors)
    rng = np.random.default_rng(seed)
    bases = rng.integers(len(X_min), size=g)
    return _append(d, _interpolate_many(rng, X_min, bases, nn))


def borderline_categories(d: LabeledDataset, m: int) -> np.ndarray:
    """``"danger"``, ``"noise"`` or ``"safe"`` for every minority row (in minority order).

    Counts majority rows among each minority sample's ``m`` nearest
    neighbours over the whole set.
    """
    if m > d.n_samples - 1:
        raise ResampleError(f"m_danger_neighbors={m} exceeds n - 1 = {d.n_samples - 1}")
    min_rows = np.flatnonzero(d.labels == MINORITY)
    idx, _ = NeighborIndex(d.features).query(d.features[min_rows], m, exclude=min_rows)
    n_maj = (d.labels[idx] == MAJORITY).sum(axis=1)
    cat = np.full(len(min_rows), "safe", dtype=object)
    cat[(n_maj * 2 >= m) & (n_maj < m)] = "danger"
    cat[n_maj == m] = "noise"
    return cat


def borderline_smote(d: LabeledDataset, params: OversampleParams = OversampleParams(), seed: int = 0) -> LabeledDataset:
    g = n_to_generate(d, params.target_ratio)
    X_min = d.minority
    nn_min = _minority_neighbors(X_min, params.k_neighbors)
    cat = borderline_categories(d, params.m_danger_neighbors)
    danger = np.flatnonzero(cat == "danger")
    if g == 0:
        return _append(d, np.empty((0, d.n_features)))
    if len(danger) == 0:
        raise ResampleError("no borderline minority samples (no DANGER points)")
    rng = np.random.default_rng(seed)
    bases = danger[rng.integers(len(danger), size=g)]
    if params.kind == "borderline-1":
        return _append(d, _interpolate_many(rng, X_min, bases, nn_min))

    k = params.k_neighbors
    if k > d.n_samples - 1:
        raise ResampleError(f"k_neighbors={k} exceeds n - 1 = {d.n_samples - 1}")
    min_rows = np.flatnonzero(d.labels == MINORITY)
    nn_all, _ = NeighborIndex(d.features).query(
        d.features[min_rows[danger]], k, exclude=min_rows[danger]
    )
    # Map minority position -> row of nn_all.
    slot = np.full(len(X_min), -1)
    slot[danger] = np.arange(len(danger))
    pick = rng.integers(k, size=g)
    nbr_rows = nn_all[slot[bases], pick]
    u = rng.random(g)
    u = np.where(d.labels[nbr_rows] == MAJORITY, 0.5 * u, u)
    base_pts = X_min[bases]
    return _append(d, base_pts + u[:, None] * (d.features[nbr_rows] - base_pts))


def svm_smote(d: LabeledDataset, params: OversampleParams = OversampleParams(), seed: int = 0) -> LabeledDataset:
    g = n_to_generate(d, params.target_ratio)
    X_min = d.minority
    nn = _minority_neighbors(X_min, params.k_neighbors)
    if g == 0:
        return _append(d, np.empty((0, d.n_features)))
    svm = svm_fit(d, reg_C=params.svm_reg_C, seed=seed)
    support_min = np.flatnonzero(svm.support[d.labels == MINORITY])
    if len(support_min) == 0:
        raise ResampleError("no minority support vectors")
    rng = np.random.default_rng(seed)
    bases = support_min[rng.integers(len(support_min), size=g)]
    return _append(d, _interpolate_many(rng, X_min, bases, nn))


def default_n_clusters(d: LabeledDataset) -> int:
    """About one cluster per ``n_minority`` samples, at least 2."""
    return int(min(d.n_samples, max(2, round(d.n_samples / max(d.n_minority, 1)))))


def kmeans_smote(d: LabeledDataset, params: OversampleParams = OversampleParams(), seed: int = 0) -> LabeledDataset:
    g = n_to_generate(d, params.target_ratio)
    if d.n_minority < 2:
        raise ResampleError(f"need at least 2 minority samples, got {d.n_minority}")
    if params.k_neighbors > d.n_minority - 1:
        raise ResampleError(
            f"k_neighbors={params.k_neighbors} exceeds n_minority - 1 = {d.n_minority - 1}"
        )
    n_clusters = params.n_clusters or default_n_clusters(d)
    if n_clusters < 1 or n_clusters > d.n_samples:
        raise ResampleError(f"n_clusters={n_clusters} must be in [1, {d.n_samples}]")
    if g == 0:
        return _append(d, np.empty((0, d.n_features)))
    km = kmeans_fit(d.features, n_clusters, seed=seed)
    kept, sparsity = [], []
    for c in range(n_clusters):
        members = km.labels == c
        n_min_c = int(np.count_nonzero(members & (d.labels == MINORITY)))
        n_maj_c = int(np.count_nonzero(members & (d.labels == MAJORITY)))
        if n_min_c > n_maj_c:
            pts = d.features[members & (d.labels == MINORITY)]
            kept.append(pts)
            sparsity.append(float(pdist(pts).mean()) if len(pts) > 1 else 0.0)
    if not kept:
        raise ResampleError("no minority-dominated cluster")
    s = np.asarray(sparsity) ** params.sparsity_exponent
    weights = s if s.sum() > 0 else np.ones(len(kept))
    counts = largest_remainder(weights, g, priority=s)

    rng = np.random.default_rng(seed)
    out = []
    for pts, n_c in zip(kept, counts):
        if n_c == 0:
            continue
        if len(pts) == 1:
            out.append(np.repeat(pts, n_c, axis=0))
            continue
        k = min(params.k_neighbors, len(pts) - 1)
        nn = NeighborIndex(pts).query_self(k)[0]
        bases = rng.integers(len(pts), size=n_c)
        out.append(_interpolate_many(rng, pts, bases, nn))
    return _append(d, np.vstack(out))


def adasyn_weights(d: LabeledDataset, k: int) -> np.ndarray:
    """Share of majority rows among each minority sample's ``k`` nearest neighbours."""
    if k > d.n_samples - 1:
        raise ResampleError(f"k_neighbors={k} exceeds n - 1 = {d.n_samples - 1}")
    min_rows = np.flatnonzero(d.labels == MINORITY)
    idx, _ = NeighborIndex(d.features).query(d.features[min_rows], k, exclude=min_rows)
    return (d.labels[idx] == MAJORITY).sum(axis=1) / k


def adasyn(d: LabeledDataset, params: OversampleParams = OversampleParams(), seed: int = 0) -> LabeledDataset:
    g = n_to_generate(d, params.target_ratio)
    X_min = d.minority
    nn = _minority_neighbors(X_min, params.k_neighbors)
    r = adasyn_weights(d, params.k_neighbors)
    if g == 0:
        return _append(d, np.empty((0, d.n_features)))
    if r.sum() == 0:
        raise ResampleError("no adaptive distribution: no minority sample has a majority neighbour")
    per_sample = largest_remainder(r, g, priority=r)
    bases = np.repeat(np.arange(len(X_min)), per_sample)
    rng = np.random.default_rng(seed)
    return _append(d, _interpolate_many(rng, X_min, bases, nn))


OVERSAMPLERS = {
    "random_oversampling": random_oversample,
    "smote": smote,
    "borderline_smote": borderline_smote,
    "svm_smote": svm_smote,
    "kmeans_smote": kmeans_smote,
    "adasyn": adasyn,
}
