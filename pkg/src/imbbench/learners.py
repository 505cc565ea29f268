"""Small trainable models used by the resamplers and the benchmark harness.

* k-means (Lloyd iterations, k-means++ seeding, restarts)
* linear soft-margin SVM trained with Pegasos-style stochastic subgradients
* L2-regularised logistic regression (accelerated gradient descent)
* k-NN minority-fraction scorer
* stratified k-fold model selection on ROC AUC
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import MINORITY, LabeledDataset
from .errors import FitError, UndefinedMetricError
from .neighbors import NeighborIndex

SUPPORT_MARGIN_EPS = 1e-3


# --------------------------------------------------------------------------
# k-means
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class KMeansModel:
    centroids: np.ndarray
    labels: np.ndarray
    inertia: float
    n_iter: int
    inertia_history: tuple = ()

    def predict(self, points):
        return _nearest_centroid(np.asarray(points, dtype=np.float64), self.centroids)[0]


def _sq_dists(points, centroids):
    diff = points[:, None, :] - centroids[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def _nearest_centroid(points, centroids):
    n = len(points)
    chunk = max(1, 2**22 // max(1, len(centroids) * max(points.shape[1], 1)))
    labels = np.empty(n, dtype=np.int64)
    dmin = np.empty(n)
    for s in range(0, n, chunk):
        d2 = _sq_dists(points[s : s + chunk], centroids)
        labels[s : s + chunk] = np.argmin(d2, axis=1)
        dmin[s : s + chunk] = d2[np.arange(len(d2)), labels[s : s + chunk]]
    return labels, dmin


def _kmeans_pp(points, k, rng):
    n = len(points)
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    d2 = _sq_dists(points, centers[:1])[:, 0]
    for c in range(1, k):
        total = d2.sum()
        if total > 0:
            i = rng.choice(n, p=d2 / total)
        else:
            i = rng.integers(n)
        centers[c] = points[i]
        d2 = np.minimum(d2, _sq_dists(points, centers[c : c + 1])[:, 0])
    return centers


def _lloyd(points, centers, max_iter):
    labels, dmin = _nearest_centroid(points, centers)
    history = [float(dmin.sum())]
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        new = np.empty_like(centers)
        counts = np.bincount(labels, minlength=len(centers))
        for c in range(len(centers)):
            if counts[c]:
                new[c] = points[labels == c].mean(axis=0)
        empty = np.flatnonzero(counts == 0)
        if len(empty):
            # Re-seed each empty cluster from the point currently farthest from its centroid.
            far = np.argsort(-dmin, kind="stable")
            for c, i in zip(empty, far):
                new[c] = points[i]
                dmin[i] = 0.0
        new_labels, new_dmin = _nearest_centroid(points, new)
        inertia = float(new_dmin.sum())
        centers = new
        history.append(inertia)
        if np.array_equal(new_labels, labels) and not len(empty):
            labels, dmin = new_labels, new_dmin
            break
        labels, dmin = new_labels, new_dmin
    return centers, labels, float(dmin.sum()), n_iter, tuple(history)


def kmeans_fit(points, k: int, seed: int = 0, max_iter: int = 100, n_restarts: int = 1) -> KMeansModel:
    """Best-of-``n_restarts`` Lloyd's algorithm with k-means++ initialisation."""
    X = np.asarray(points, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    n = len(X)
    if k < 1 or k > n:
        raise FitError(f"k-means needs 1 <= k <= n, got k={k}, n={n}")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(max(1, n_restarts)):
        centers = _kmeans_pp(X, k, rng)
        result = _lloyd(X, centers, max_iter)
        if best is None or result[2] < best[2]:
            best = result
    centers, labels, inertia, n_iter, history = best
    return KMeansModel(centers, labels, inertia, n_iter, history)


# --------------------------------------------------------------------------
# Linear scorers
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LinearScorer:
    weights: np.ndarray
    intercept: float
    loss: str
    reg: float
    support: np.ndarray | None = field(default=None, repr=False)

    def decision_function(self, X):
        X = np.asarray(X, dtype=np.float64)
        return X @ self.weights + self.intercept

    def score(self, X):
        """Higher means more likely minority; probabilities for the logistic loss."""
        z = self.decision_function(X)
        if self.loss == "logistic":
            return _sigmoid(z)
        return z


def _sigmoid(z):
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _signed_labels(d: LabeledDataset):
    return np.where(d.labels == MINORITY, 1.0, -1.0)


def svm_fit(d: LabeledDataset, reg_C: float = 1.0, epochs: int = 20, seed: int = 0,
            batch_size: int = 32) -> LinearScorer:
    """Linear soft-margin SVM via mini-batch Pegasos.

    Minimises ``lam/2 * ||(w, b)||^2 + mean(hinge)`` with ``lam = 1 / (C n)``.
    The intercept is carried as a constant feature (and so regularised too).
    The returned parameters are the average of the iterates over the second
    half of training. Training points with ``y * score <= 1 + 1e-3`` are
    flagged as support vectors.
    """
    d.require_both_classes()
    if reg_C <= 0:
        raise FitError(f"reg_C must be positive, got {reg_C}")
    X = np.hstack([d.features, np.ones((d.n_samples, 1))])
    y = _signed_labels(d)
    n = len(y)
    lam = 1.0 / (reg_C * n)
    rng = np.random.default_rng(seed)
    bs = max(1, min(batch_size, n))
    w = np.zeros(X.shape[1])
    avg = np.zeros_like(w)
    n_avg = 0
    steps_per_epoch = -(-n // bs)
    total = max(1, epochs) * steps_per_epoch
    radius = 1.0 / np.sqrt(lam)
    t = 0
    for _ in range(max(1, epochs)):
        perm = rng.permutation(n)
        for s in range(0, n, bs):
            t += 1
            batch = perm[s : s + bs]
            eta = 1.0 / (lam * t)
            margins = y[batch] * (X[batch] @ w)
            viol = margins < 1.0
            w *= 1.0 - eta * lam
            if viol.any():
                w += (eta / len(batch)) * (y[batch][viol] @ X[batch][viol])
            norm = np.linalg.norm(w)
            if norm > radius:
                w *= radius / norm
            if t > total // 2:
                avg += w
                n_avg += 1
    w = avg / max(n_avg, 1)
    scorer = LinearScorer(w[:-1].copy(), float(w[-1]), "hinge", reg_C)
    margins = y * scorer.decision_function(d.features)
    support = margins <= 1.0 + SUPPORT_MARGIN_EPS
    return LinearScorer(scorer.weights, scorer.intercept, "hinge", reg_C, support)


def logistic_objective(w, b, X, y01, lam):
    """Mean log-loss plus ``lam/2 ||w||^2`` (intercept unpenalised) and its gradient."""
    z = X @ w + b
    # log(1 + exp(z)) - y z, computed stably
    loss = np.mean(np.logaddexp(0.0, z) - y01 * z) + 0.5 * lam * (w @ w)
    r = (_sigmoid(z) - y01) / len(y01)
    return loss, X.T @ r + lam * w, r.sum()


def logistic_fit(d: LabeledDataset, reg_lambda: float = 1e-2, epochs: int = 2000, seed: int = 0,
                 tol: float = 1e-7) -> LinearScorer:
    """L2-regularised logistic regression by Nesterov-accelerated gradient descent.

    ``epochs`` bounds the number of full-batch iterations; the run stops early
    once the gradient norm falls below ``tol``. ``seed`` only perturbs the
    starting point by a negligible amount and exists for interface symmetry.
    """
    d.require_both_classes()
    X = d.features
    y01 = (d.labels == MINORITY).astype(np.float64)
    n, p = X.shape
    rng = np.random.default_rng(seed)
    w = rng.normal(scale=1e-8, size=p)
    prior = y01.mean()
    b = float(np.log(prior / (1 - prior)))
    # Lipschitz bound of the gradient for the Armijo-free step size.
    sq = (X**2).sum(axis=1).mean() if p else 0.0
    L = 0.25 * (sq + 1.0) + reg_lambda
    step = 1.0 / L
    vw, vb = w.copy(), b
    theta = 1.0
    prev_loss = np.inf
    for _ in range(max(1, epochs)):
        loss, gw, gb = logistic_objective(vw, vb, X, y01, reg_lambda)
        w_next = vw - step * gw
        b_next = vb - step * gb
        theta_next = 0.5 * (1 + np.sqrt(1 + 4 * theta * theta))
        mom = (theta - 1) / theta_next
        cur_loss, cw, cb = logistic_objective(w_next, b_next, X, y01, reg_lambda)
        if cur_loss > prev_loss:
            # Restart momentum when the objective goes up.
            theta_next = 1.0
            mom = 0.0
        vw = w_next + mom * (w_next - w)
        vb = b_next + mom * (b_next - b)
        w, b, theta, prev_loss = w_next, b_next, theta_next, cur_loss
        if np.sqrt(cw @ cw + cb * cb) <= tol:
            break
    return LinearScorer(w, float(b), "logistic", reg_lambda)


# --------------------------------------------------------------------------
# k-NN scorer
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class KNNScorer:
    train: LabeledDataset
    k: int
    _index: NeighborIndex = field(repr=False, default=None)

    def __post_init__(self):
        if not 1 <= self.k <= self.train.n_samples:
            raise FitError(f"k={self.k} must be in [1, {self.train.n_samples}]")
        if self._index is None:
            object.__setattr__(self, "_index", NeighborIndex(self.train.features))

    def score(self, X):
        idx, _ = self._index.query(X, self.k)
        return (self.train.labels[idx] == MINORITY).mean(axis=1)


def knn_score(train: LabeledDataset, query_points, k: int) -> np.ndarray:
    """Fraction of minority labels among the ``k`` nearest training points."""
    return KNNScorer(train, k).score(query_points)


# --------------------------------------------------------------------------
# Model selection
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ClassifierConfig:
    kind: str  # "logistic" or "knn"
    param: float

    @property
    def name(self) -> str:
        if self.kind == "knn":
            return f"knn(k={int(self.param)})"
        return f"logistic(lambda={self.param:g})"

    def fit(self, d: LabeledDataset, seed: int = 0):
        if self.kind == "logistic":
            return logistic_fit(d, reg_lambda=self.param, seed=seed)
        if self.kind == "knn":
            return KNNScorer(d, min(int(self.param), d.n_samples))
        raise FitError(f"unknown classifier kind {self.kind!r}")


DEFAULT_CANDIDATES = (
    ClassifierConfig("logistic", 1e-3),
    ClassifierConfig("logistic", 1e-1),
    ClassifierConfig("knn", 5),
    ClassifierConfig("knn", 15),
)


def stratified_folds(labels, folds: int, seed: int):
    """Fold id per sample: classes are shuffled separately and dealt round-robin."""
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    fold_of = np.empty(len(labels), dtype=np.int64)
    offset = 0
    for cls in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == cls))
        fold_of[idx] = (np.arange(len(idx)) + offset) % folds
        offset += len(idx)
    return fold_of


@dataclass(frozen=True, eq=False)
class SelectionResult:
    config: ClassifierConfig
    scorer: object
    cv_scores: tuple  # mean out-of-fold ROC AUC per candidate (nan if every fold skipped)


def select_model_cv(train: LabeledDataset, candidates=DEFAULT_CANDIDATES, folds: int = 5,
                    seed: int = 0) -> SelectionResult:
    """Pick the candidate with the best mean out-of-fold ROC AUC and refit it on ``train``.

    Folds whose validation part holds a single class are skipped. Ties go to
    the earlier candidate.
    """
    from .metrics import ScoredPredictions, roc_auc

    if folds < 2:
        raise FitError(f"need at least 2 folds, got {folds}")
    candidates = list(candidates)
    if not candidates:
        raise FitError("no classifier candidates")
    train.require_both_classes()
    fold_of = stratified_folds(train.labels, folds, seed)
    per_candidate = [[] for _ in candidates]
    for f in range(folds):
        val = fold_of == f
        fit_part = train.subset(np.flatnonzero(~val))
        val_part = train.subset(np.flatnonzero(val))
        if val_part.n_minority == 0 or val_part.n_majority == 0:
            continue
        if fit_part.n_minority == 0 or fit_part.n_majority == 0:
            continue
        knn_cache = {}
        for ci, cand in enumerate(candidates):
            if cand.kind == "knn":
                k_max = min(max(int(c.param) for c in candidates if c.kind == "knn"),
                            fit_part.n_samples)
                if "idx" not in knn_cache:
                    index = NeighborIndex(fit_part.features)
                    knn_cache["idx"] = index.query(val_part.features, k_max)[0]
                k = min(int(cand.param), fit_part.n_samples)
                neigh = knn_cache["idx"][:, :k]
                scores = (fit_part.labels[neigh] == MINORITY).mean(axis=1)
            else:
                scores = cand.fit(fit_part, seed=seed).score(val_part.features)
            try:
                auc = roc_auc(ScoredPredictions(scores, val_part.labels))
            except UndefinedMetricError:
                continue
            per_candidate[ci].append(auc)
    means = tuple(float(np.mean(s)) if s else float("nan") for s in per_candidate)
    if all(np.isnan(m) for m in means):
        raise FitError("every cross-validation fold was skipped (single-class folds)")
    best = max(range(len(candidates)),
               key=lambda i: (-np.inf if np.isnan(means[i]) else means[i], -i))
    scorer = candidates[best].fit(train, seed=seed)
    return SelectionResult(candidates[best], scorer, means)
