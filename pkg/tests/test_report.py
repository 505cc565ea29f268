import csv
import json
import re
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from imbbench.benchmark import EvaluationRecord
from imbbench.report import (
    RankTable,
    aggregate_ranks,
    compute_ranks,
    emit_report,
    friedman_statistic,
    load_method_tables,
    metric_column,
    rank_svg,
    rank_table,
    summarize_tables,
)


class TestComputeRanks:
    def test_simple(self):
        assert compute_ranks({"a": 3, "b": 1, "c": 2}) == {"a": 1, "b": 3, "c": 2}

    def test_lower_is_better(self):
        assert compute_ranks({"a": 3, "b": 1, "c": 2}, higher_is_better=False) == \
            {"a": 3, "b": 1, "c": 2}

    def test_all_tied(self):
        r = compute_ranks({m: 0.5 for m in "abcde"})
        assert set(r.values()) == {3.0}

    def test_missing_excluded(self):
        assert compute_ranks({"a": 0.9, "b": None, "c": float("nan"), "d": 0.1}) == {"a": 1, "d": 2}

    def test_too_few(self):
        with pytest.raises(ValueError):
            compute_ranks({"a": 1.0, "b": None})

    def test_tie_policies(self):
        s = {"a": 2, "b": 2, "c": 1}
        assert compute_ranks(s, ties="min") == {"a": 1, "b": 1, "c": 3}
        assert compute_ranks(s, ties="max") == {"a": 2, "b": 2, "c": 3}
        with pytest.raises(ValueError):
            compute_ranks(s, ties="weird")

    def test_credit_card_pr(self, fixtures_dir):
        tables = load_method_tables(fixtures_dir / "appendix")
        ranks = compute_ranks(metric_column(tables, "pr_auc")["credit_card"])
        assert ranks["svm_smote"] == 1.0
        assert "kmeans_smote" not in ranks

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.integers(0, 5), min_size=2, max_size=17))
    def test_average_tie_sum(self, values):
        r = compute_ranks({f"m{i}": v for i, v in enumerate(values)})
        m = len(values)
        assert abs(sum(r.values()) - m * (m + 1) / 2) <= 1e-9


class TestAggregate:
    def test_always_first(self):
        t = rank_table({f"d{i}": {"a": 1.0, "b": 0.5} for i in range(4)})
        s = aggregate_ranks(t)["a"]
        assert (s.mean, s.min, s.max, s.p25, s.p50, s.p75, s.n) == (1, 1, 1, 1, 1, 1, 4)

    def test_two_values(self):
        t = rank_table({"d0": {"a": 1.0, "b": 0.5, "c": 0.0}, "d1": {"a": 0.0, "b": 0.5, "c": 1.0}})
        s = aggregate_ranks(t)["a"]
        assert (s.mean, s.p50) == (2.0, 2.0)

    def test_missing_method_omitted(self):
        t = RankTable(("d",), ("a", "b", "c"), np.array([[1.0, 2.0, np.nan]]))
        with pytest.warns(UserWarning):
            out = aggregate_ranks(t)
        assert set(out) == {"a", "b"}

    def test_n_counts_non_missing(self):
        t = rank_table({"d0": {"a": 1, "b": 2}, "d1": {"a": 1, "b": None, "c": 3}})
        agg = aggregate_ranks(t)
        assert (agg["a"].n, agg["b"].n, agg["c"].n) == (2, 1, 1)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**31))
    def test_order_invariants(self, seed):
        rng = np.random.default_rng(seed)
        data = {f"d{i}": {f"m{j}": (None if rng.random() < 0.2 else float(rng.integers(0, 4)))
                          for j in range(6)} for i in range(int(rng.integers(1, 10)))}
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            t = rank_table(data)
            agg = aggregate_ranks(t)
        for s in agg.values():
            assert s.min <= s.p25 <= s.p50 <= s.p75 <= s.max
            assert s.min <= s.mean <= s.max

    def test_appendix_baseline_pr(self, fixtures_dir):
        s = summarize_tables(load_method_tables(fixtures_dir / "appendix"), ["pr_auc"])
        base = s["pr_auc"]["baseline"]
        assert base.n == 23
        assert base.mean == pytest.approx(6.196, abs=0.5)

    def test_kmeans_smote_small_n(self, fixtures_dir):
        s = summarize_tables(load_method_tables(fixtures_dir / "appendix"))
        assert s["p_roc_auc"]["kmeans_smote"].n == 4


class TestFriedman:
    @pytest.mark.parametrize("n", [2, 5, 10, 23])
    def test_dominance_equals_n(self, n):
        t = rank_table({f"d{i}": {"a": 1.0, "b": 0.0} for i in range(n)})
        assert friedman_statistic(t).statistic == pytest.approx(n, abs=1e-9)

    def test_complete_ties_zero(self):
        t = rank_table({f"d{i}": {"a": 0.5, "b": 0.5, "c": 0.5} for i in range(6)})
        r = friedman_statistic(t)
        assert r.statistic == 0.0 and r.p_value == pytest.approx(1.0)

    def test_relabel_invariant(self, rng):
        data = {f"d{i}": {m: float(rng.random()) for m in "abcd"} for i in range(9)}
        t = rank_table(data)
        perm = rank_table(data, methods=["c", "a", "d", "b"])
        assert friedman_statistic(t).statistic == pytest.approx(friedman_statistic(perm).statistic)

    def test_incomplete_rows_dropped(self):
        t = rank_table({"d0": {"a": 1, "b": 0, "c": 2}, "d1": {"a": 1, "b": 0},
                        "d2": {"a": 1, "b": 0, "c": 2}})
        r = friedman_statistic(t, ["a", "b", "c"])
        assert (r.n, r.n_dropped, r.k) == (2, 1, 3)

    def test_subset_reranked(self):
        # Ranks among a and b only: a always first.
        t = rank_table({f"d{i}": {"a": 0.9, "b": 0.1, "c": 1.0} for i in range(5)})
        assert friedman_statistic(t, ["a", "b"]).statistic == pytest.approx(5)

    def test_errors(self):
        t = rank_table({"d0": {"a": 1, "b": 0}})
        with pytest.raises(ValueError):
            friedman_statistic(t)
        with pytest.raises(ValueError):
            friedman_statistic(rank_table({"d0": {"a": 1, "b": 0}, "d1": {"a": 1, "b": 0}}), ["a"])

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**31))
    def test_nonnegative_zero_iff_equal_means(self, seed):
        rng = np.random.default_rng(seed)
        k, n = int(rng.integers(2, 6)), int(rng.integers(2, 12))
        data = {f"d{i}": {f"m{j}": float(rng.integers(0, 3)) for j in range(k)} for i in range(n)}
        r = friedman_statistic(rank_table(data))
        assert r.statistic >= 0
        equal = np.allclose(r.mean_ranks, r.mean_ranks[0])
        assert (abs(r.statistic) <= 1e-9) == equal


def _records():
    out = []
    for ds, vals in {"d0": (0.9, 0.6), "d1": (0.4, 0.7)}.items():
        for m, v in zip(("smote", "enn"), vals):
            metrics = {k: v for k in ("pr_auc", "roc_auc", "p_roc_auc")}
            out.append(EvaluationRecord(ds, m, 0, {}, "ok", metrics, 0.1 if m == "smote" else 0.3))
    out.append(EvaluationRecord("d0", "smote", 1, {}, "ok", {"pr_auc": 0.1, "roc_auc": 0.1,
                                                              "p_roc_auc": 0.1}, 0.5))
    return out


class TestEmitReport:
    def test_empty(self, tmp_path):
        with pytest.raises(ValueError, match="no records"):
            emit_report([], tmp_path)

    def test_files(self, tmp_path):
        paths = emit_report(_records(), tmp_path)
        for m in ("pr_auc", "roc_auc", "p_roc_auc"):
            rows = list(csv.reader((tmp_path / f"ranks_{m}.csv").open()))
            assert rows[0] == ["dataset", "smote", "enn"]
            assert len(rows) == 3 and all(len(r) == 3 for r in rows)
            assert rows[1] == ["d0", "1", "2"] and rows[2] == ["d1", "2", "1"]
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["pr_auc"]["smote"]["mean"] == 1.5
        runtimes = list(csv.DictReader((tmp_path / "runtimes.csv").open()))
        smote = next(r for r in runtimes if r["method"] == "smote")
        assert float(smote["min_seconds"]) == 0.1 and float(smote["max_seconds"]) == 0.5
        assert "svg_pr_auc" in paths

    def test_svg_marks(self, tmp_path):
        emit_report(_records(), tmp_path, ["roc_auc"])
        svg = (tmp_path / "ranks_roc_auc.svg").read_text()
        rows = re.findall(r'<g class="method-row".*?</g>', svg, flags=re.S)
        assert len(rows) == 2
        assert all(len(re.findall(r'<circle class="mark', r)) == 6 for r in rows)

    def test_no_svg(self, tmp_path):
        emit_report(_records(), tmp_path, ["pr_auc"], svg=False)
        assert not (tmp_path / "ranks_pr_auc.svg").exists()

    def test_unknown_metric(self, tmp_path):
        with pytest.raises(ValueError):
            emit_report(_records(), tmp_path, ["accuracy"])

    def test_unwritable(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        with pytest.raises(OSError):
            emit_report(_records(), blocker / "sub")


def test_rank_svg_standalone():
    t = rank_table({"d": {"a": 1.0, "b": 0.0}})
    svg = rank_svg(aggregate_ranks(t), title="x<y")
    assert svg.startswith("<svg") and "x&lt;y" in svg
