"""Threshold-sweep curves and scalar metrics for binary scored predictions.

The positive (minority) class is label 1 and higher scores mean "more
positive". A sample is predicted positive when ``score >= threshold``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UndefinedMetricError

DEFAULT_THRESHOLD = 0.5

CURVE_METRICS = ("pr_auc", "roc_auc", "p_roc_auc")
SCALAR_METRICS = ("balanced_accuracy", "precision", "recall", "f1_max", "mcc")
ALL_METRICS = ("balanced_accuracy", "precision", "recall", "f1_max", "mcc",
               "pr_auc", "roc_auc", "p_roc_auc")


@dataclass(frozen=True, eq=False)
class ScoredPredictions:
    scores: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=np.float64).reshape(-1)
        y = np.asarray(self.labels).reshape(-1)
        if len(s) != len(y):
            raise ValueError(f"{len(s)} scores but {len(y)} labels")
        if not np.isfinite(s).all():
            raise UndefinedMetricError("scores contain NaN or infinite values")
        object.__setattr__(self, "scores", s)
        object.__setattr__(self, "labels", (y == 1).astype(np.int64))

    @property
    def n_pos(self) -> int:
        return int(self.labels.sum())

    @property
    def n_neg(self) -> int:
        return len(self.labels) - self.n_pos


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int


@dataclass(frozen=True, eq=False)
class CurvePoints:
    x: np.ndarray
    y: np.ndarray
    kind: str
    thresholds: np.ndarray


def confusion_at(sp: ScoredPredictions, threshold: float) -> ConfusionCounts:
    pred = sp.scores >= threshold
    pos = sp.labels == 1
    tp = int(np.count_nonzero(pred & pos))
    fp = int(np.count_nonzero(pred & ~pos))
    return ConfusionCounts(tp, fp, sp.n_pos - tp, sp.n_neg - fp)


def _sweep(sp: ScoredPredictions):
    """Cumulative (tp, fp) at each distinct threshold, thresholds descending."""
    order = np.argsort(-sp.scores, kind="stable")
    s = sp.scores[order]
    y = sp.labels[order]
    last_of_group = np.r_[s[1:] != s[:-1], True]
    tps = np.cumsum(y)[last_of_group]
    fps = np.cumsum(1 - y)[last_of_group]
    return s[last_of_group], tps, fps


def _require_both(sp, name):
    if sp.n_pos == 0 or sp.n_neg == 0:
        raise UndefinedMetricError(
            f"{name} needs both classes (positives={sp.n_pos}, negatives={sp.n_neg})"
        )


def roc_curve(sp: ScoredPredictions) -> CurvePoints:
    _require_both(sp, "ROC curve")
    thr, tps, fps = _sweep(sp)
    fpr = np.r_[0.0, fps / sp.n_neg]
    tpr = np.r_[0.0, tps / sp.n_pos]
    return CurvePoints(fpr, tpr, "ROC", np.r_[np.inf, thr])


def pr_curve(sp: ScoredPredictions) -> CurvePoints:
    """Recall (x) against precision (y) at every distinct threshold."""
    if sp.n_pos == 0:
        raise UndefinedMetricError("PR curve needs at least one positive")
    thr, tps, fps = _sweep(sp)
    return CurvePoints(tps / sp.n_pos, tps / (tps + fps), "PR", thr)


def roc_auc(sp: ScoredPredictions) -> float:
    """Trapezoidal ROC area; equals P(s+ > s-) + P(s+ = s-)/2."""
    c = roc_curve(sp)
    return float(np.sum(np.diff(c.x) * (c.y[1:] + c.y[:-1]) / 2.0))


def pr_auc(sp: ScoredPredictions) -> float:
    """Average precision: sum of precision times recall increment, no interpolation."""
    c = pr_curve(sp)
    recall_steps = np.diff(np.r_[0.0, c.x])
    return float(np.sum(recall_steps * c.y))


def partial_roc_auc(sp: ScoredPredictions, fpr_cap: float) -> float:
    """ROC area over FPR in [0, fpr_cap], divided by ``fpr_cap``.

    The segment crossing the cap is linearly interpolated.
    """
    if not fpr_cap > 0:
        raise UndefinedMetricError(f"fpr_cap must be positive, got {fpr_cap}")
    fpr_cap = min(float(fpr_cap), 1.0)
    c = roc_curve(sp)
    x, y = c.x, c.y
    # searchsorted on the right keeps vertical segments at x == cap.
    stop = int(np.searchsorted(x, fpr_cap, side="right"))
    xs, ys = x[:stop], y[:stop]
    if xs[-1] < fpr_cap:
        x0, x1, y0, y1 = x[stop - 1], x[stop], y[stop - 1], y[stop]
        y_cap = y0 + (y1 - y0) * (fpr_cap - x0) / (x1 - x0)
        xs, ys = np.r_[xs, fpr_cap], np.r_[ys, y_cap]
    area = float(np.sum(np.diff(xs) * (ys[1:] + ys[:-1]) / 2.0))
    return area / fpr_cap


def _f1(tp, fp, fn):
    denom = 2 * tp + fp + fn
    return np.where(denom > 0, 2 * tp / np.where(denom > 0, denom, 1), 0.0)


def f1_max(sp: ScoredPredictions) -> float:
    """Largest F1 over all distinct-score thresholds."""
    if sp.n_pos == 0:
        raise UndefinedMetricError("F1 max needs at least one positive")
    _, tps, fps = _sweep(sp)
    return float(np.max(_f1(tps, fps, sp.n_pos - tps)))


def scalar_metrics(sp: ScoredPredictions, threshold: float = DEFAULT_THRESHOLD) -> dict:
    """Balanced accuracy, precision, recall and MCC at one operating point.

    Zero denominators yield 0 (precision, recall, MCC); a missing class
    contributes 0 to balanced accuracy's mean of per-class recalls.
    """
    cc = confusion_at(sp, threshold)
    tp, fp, fn, tn = cc.tp, cc.fp, cc.fn, cc.tn
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    specificity = tn / (tn + fp) if tn + fp else 0.0
    denom = float(tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    mcc = (tp * tn - fp * fn) / np.sqrt(denom) if denom > 0 else 0.0
    return {
        "balanced_accuracy": (recall + specificity) / 2.0,
        "precision": precision,
        "recall": recall,
        "mcc": float(mcc),
    }


def all_metrics(sp: ScoredPredictions, fpr_cap: float, threshold: float = DEFAULT_THRESHOLD) -> dict:
    """Every reported metric, keyed as in ``ALL_METRICS``."""
    out = scalar_metrics(sp, threshold)
    out["f1_max"] = f1_max(sp)
    out["pr_auc"] = pr_auc(sp)
    out["roc_auc"] = roc_auc(sp)
    out["p_roc_auc"] = partial_roc_auc(sp, fpr_cap)
    return {m: float(out[m]) for m in ALL_METRICS}
