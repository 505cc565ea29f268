import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from imbbench.errors import UndefinedMetricError
from imbbench.metrics import (
    ALL_METRICS,
    ScoredPredictions,
    all_metrics,
    confusion_at,
    f1_max,
    partial_roc_auc,
    pr_auc,
    pr_curve,
    roc_auc,
    roc_curve,
    scalar_metrics,
)

from oracles import enumerated_ap, pairwise_auc


def sp(scores, labels):
    return ScoredPredictions(np.asarray(scores, float), np.asarray(labels))


def random_instance(rng):
    n = int(rng.integers(2, 301))
    labels = rng.integers(0, 2, n)
    labels[0], labels[1] = 0, 1
    scores = rng.integers(0, 20, n) / 20 if rng.random() < 0.5 else rng.random(n)
    return scores, labels


class TestConfusion:
    def test_below_min(self):
        c = confusion_at(sp([0.2, 0.4, 0.9], [0, 1, 1]), 0.0)
        assert c.fn == 0 and c.tn == 0

    def test_above_max(self):
        c = confusion_at(sp([0.2, 0.4, 0.9], [0, 1, 1]), 1.0)
        assert c.tp == 0 and c.fp == 0

    def test_direct(self):
        c = confusion_at(sp([0.9, 0.4], [1, 0]), 0.5)
        assert (c.tp, c.tn, c.fp, c.fn) == (1, 1, 0, 0)


class TestROC:
    def test_perfect(self):
        assert roc_auc(sp([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1])) == 1.0

    def test_example_and_flip(self):
        s = [0.9, 0.8, 0.7, 0.6]
        assert roc_auc(sp(s, [0, 1, 0, 1])) == pytest.approx(0.25)
        assert roc_auc(sp(s, [1, 0, 1, 0])) == pytest.approx(0.75)

    def test_single_class(self):
        with pytest.raises(UndefinedMetricError):
            roc_auc(sp([0.1, 0.2], [1, 1]))

    def test_curve_endpoints(self, rng):
        s, y = random_instance(rng)
        c = roc_curve(sp(s, y))
        assert (c.x[0], c.y[0], c.x[-1], c.y[-1]) == (0, 0, 1, 1)
        assert (np.diff(c.x) >= 0).all()

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**31))
    def test_pairwise_and_complement(self, seed):
        s, y = random_instance(np.random.default_rng(seed))
        a = roc_auc(sp(s, y))
        assert abs(a - pairwise_auc(s, y)) <= 1e-9
        assert abs(a + roc_auc(sp(s, 1 - y)) - 1) <= 1e-12


class TestPR:
    def test_perfect(self):
        assert pr_auc(sp([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1])) == 1.0

    def test_single_positive_top_and_bottom(self):
        s = np.linspace(1, 0.1, 10)
        y = np.zeros(10, int)
        y[0] = 1
        assert pr_auc(sp(s, y)) == pytest.approx(1.0)
        y = np.zeros(10, int)
        y[-1] = 1
        assert pr_auc(sp(s, y)) == pytest.approx(0.1)

    @pytest.mark.parametrize("r", [1, 2, 5, 17, 40])
    def test_single_positive_at_rank(self, r):
        n = 40
        y = np.zeros(n, int)
        y[r - 1] = 1
        assert pr_auc(sp(-np.arange(n, dtype=float), y)) == pytest.approx(1 / r, abs=1e-15)

    def test_all_equal_is_prevalence(self):
        assert pr_auc(sp(np.ones(8), [1, 0, 0, 1, 0, 0, 0, 0])) == pytest.approx(0.25)

    def test_no_positive(self):
        with pytest.raises(UndefinedMetricError):
            pr_auc(sp([0.1, 0.2], [0, 0]))

    def test_curve_recall_reaches_one(self, rng):
        s, y = random_instance(rng)
        c = pr_curve(sp(s, y))
        assert c.x[-1] == 1.0

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**31))
    def test_enumerated_oracle(self, seed):
        s, y = random_instance(np.random.default_rng(seed))
        assert pr_auc(sp(s, y)) == pytest.approx(enumerated_ap(s, y), abs=1e-12)


class TestPartialROC:
    def test_cap_one_equals_full(self, rng):
        for _ in range(20):
            s, y = random_instance(rng)
            assert abs(partial_roc_auc(sp(s, y), 1.0) - roc_auc(sp(s, y))) <= 1e-12

    @pytest.mark.parametrize("cap", [0.01, 0.1, 0.5, 1.0])
    def test_perfect(self, cap):
        assert partial_roc_auc(sp([0.1, 0.2, 0.3, 0.8, 0.9], [0, 0, 0, 1, 1]), cap) == 1.0

    def test_chance_tends_to_half_cap(self):
        rng = np.random.default_rng(0)
        n = 200_000
        s, y = rng.random(n), rng.integers(0, 2, n)
        assert partial_roc_auc(sp(s, y), 0.2) == pytest.approx(0.1, abs=0.01)

    def test_step_curve_cap(self):
        # ROC points (0,0) (0,0.5) (0.5,0.5) (0.5,1) (1,1).
        s = [0.9, 0.8, 0.7, 0.6]
        y = [1, 0, 1, 0]
        assert partial_roc_auc(sp(s, y), 0.25) == pytest.approx(0.5)
        assert partial_roc_auc(sp(s, y), 0.5) == pytest.approx(0.5)

    def test_interpolated_cap(self):
        # All scores tied: the curve is the diagonal, area over [0, 0.25] is 0.25^2/2.
        assert partial_roc_auc(sp([0.5, 0.5], [1, 0]), 0.25) == pytest.approx(0.03125 / 0.25)

    def test_bad_cap(self):
        with pytest.raises(UndefinedMetricError):
            partial_roc_auc(sp([0.1, 0.9], [0, 1]), 0.0)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**31), st.floats(0.01, 1.0), st.floats(0.01, 1.0))
    def test_nested_caps(self, seed, a, b):
        s, y = random_instance(np.random.default_rng(seed))
        lo, hi = min(a, b), max(a, b)
        p = sp(s, y)
        assert partial_roc_auc(p, lo) * lo <= partial_roc_auc(p, hi) * hi + 1e-12


class TestScalar:
    def test_perfect(self):
        m = scalar_metrics(sp([0.9, 0.8, 0.1], [1, 1, 0]))
        assert all(m[k] == 1.0 for k in m)

    def test_all_negative_predictions(self):
        m = scalar_metrics(sp([0.1, 0.2, 0.3], [1, 0, 0]))
        assert (m["recall"], m["balanced_accuracy"], m["mcc"], m["precision"]) == (0, 0.5, 0, 0)

    def test_one_each(self):
        m = scalar_metrics(sp([0.9, 0.9, 0.1, 0.1], [1, 0, 1, 0]))
        assert m == {"balanced_accuracy": 0.5, "precision": 0.5, "recall": 0.5, "mcc": 0.0}

    def test_f1_perfect(self):
        assert f1_max(sp([0.1, 0.9], [0, 1])) == 1.0

    @pytest.mark.parametrize("p", [0.1, 0.25, 0.5])
    def test_f1_all_equal(self, p):
        n = 20
        y = np.r_[np.ones(int(n * p)), np.zeros(n - int(n * p))]
        assert f1_max(sp(np.ones(n), y)) == pytest.approx(2 * p / (1 + p))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**31))
    def test_f1_max_dominates_threshold(self, seed):
        s, y = random_instance(np.random.default_rng(seed))
        m = scalar_metrics(sp(s, y))
        p, r = m["precision"], m["recall"]
        f1 = 0.0 if p + r == 0 else 2 * p * r / (p + r)
        assert f1_max(sp(s, y)) >= f1 - 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31))
def test_monotone_transform_invariance(seed):
    rng = np.random.default_rng(seed)
    s, y = random_instance(rng)
    cap = max(y.mean(), 0.05)
    a = all_metrics(sp(s, y), cap)
    b = all_metrics(sp(np.exp(3 * s) - 7, y), cap)
    for m in ("pr_auc", "roc_auc", "p_roc_auc", "f1_max"):
        assert a[m] == pytest.approx(b[m], abs=1e-12)


def test_all_metrics_keys():
    m = all_metrics(sp([0.2, 0.7, 0.4], [0, 1, 1]), 0.5)
    assert tuple(m) == ALL_METRICS
    assert all(math.isfinite(v) for v in m.values())


def test_nonfinite_scores_rejected():
    with pytest.raises(UndefinedMetricError):
        sp([np.nan, 1.0], [0, 1])
