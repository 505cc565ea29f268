"""Per-dataset method ranks, rank summaries, the Friedman statistic and report files."""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import chi2, rankdata

from .benchmark import DISPLAY_NAMES, METHOD_BY_DISPLAY, METHODS, best_per_method
from .metrics import ALL_METRICS, CURVE_METRICS

TIE_POLICIES = ("average", "min", "max", "dense", "ordinal")


@dataclass(frozen=True, eq=False)
class RankTable:
    """Ranks for one metric; rows are datasets, columns methods, NaN = missing."""

    datasets: tuple
    methods: tuple
    ranks: np.ndarray

    def column(self, method) -> np.ndarray:
        return self.ranks[:, self.methods.index(method)]


@dataclass(frozen=True)
class RankSummary:
    mean: float
    min: float
    max: float
    p25: float
    p50: float
    p75: float
    n: int


@dataclass(frozen=True)
class FriedmanResult:
    statistic: float
    k: int
    n: int
    p_value: float
    n_dropped: int
    mean_ranks: tuple


def compute_ranks(scores: Mapping[str, float | None], higher_is_better: bool = True,
                  ties: str = "average") -> dict:
    """Rank 1 = best. Methods whose score is missing (None/NaN) are left out."""
    if ties not in TIE_POLICIES:
        raise ValueError(f"ties must be one of {TIE_POLICIES}, got {ties!r}")
    present = [(m, float(v)) for m, v in scores.items()
               if v is not None and not (isinstance(v, float) and math.isnan(v))]
    if len(present) < 2:
        raise ValueError(f"need at least 2 methods with scores to rank, got {len(present)}")
    values = np.array([v for _, v in present])
    r = rankdata(-values if higher_is_better else values, method=ties)
    return {m: float(x) for (m, _), x in zip(present, r)}


def rank_table(scores_by_dataset: Mapping[str, Mapping[str, float | None]],
               methods: Sequence[str] | None = None, higher_is_better: bool = True,
               ties: str = "average") -> RankTable:
    """Rank methods within every dataset; datasets with fewer than 2 scored methods are dropped."""
    if methods is None:
        seen = []
        for row in scores_by_dataset.values():
            seen.extend(m for m in row if m not in seen)
        methods = [m for m in METHODS if m in seen] + [m for m in seen if m not in METHODS]
    methods = tuple(methods)
    datasets, rows = [], []
    for ds, row in scores_by_dataset.items():
        sub = {m: row.get(m) for m in methods}
        try:
            ranks = compute_ranks(sub, higher_is_better, ties)
        except ValueError:
            warnings.warn(f"dataset {ds!r} has fewer than 2 scored methods; skipped", stacklevel=2)
            continue
        datasets.append(ds)
        rows.append([ranks.get(m, np.nan) for m in methods])
    arr = np.array(rows, dtype=np.float64).reshape(len(rows), len(methods))
    return RankTable(tuple(datasets), methods, arr)


def aggregate_ranks(table: RankTable) -> dict:
    """RankSummary per method over its non-missing ranks (linear-interpolated percentiles)."""
    out = {}
    for j, m in enumerate(table.methods):
        col = table.ranks[:, j]
        col = col[~np.isnan(col)]
        if len(col) == 0:
            warnings.warn(f"method {m!r} has no ranked datasets; omitted", stacklevel=2)
            continue
        p25, p50, p75 = np.percentile(col, [25, 50, 75])
        out[m] = RankSummary(float(col.mean()), float(col.min()), float(col.max()),
                             float(p25), float(p50), float(p75), int(len(col)))
    return out


def friedman_statistic(table: RankTable, methods: Sequence[str] | None = None) -> FriedmanResult:
    """Friedman chi-square over datasets where all chosen methods are present.

    Ranks are recomputed among the chosen methods only (average ties), so any
    table of ranks or of raw "higher is better" values works.
    """
    methods = tuple(methods or table.methods)
    cols = [table.methods.index(m) for m in methods]
    sub = table.ranks[:, cols]
    complete = ~np.isnan(sub).any(axis=1)
    sub = sub[complete]
    k, n = len(methods), int(complete.sum())
    if k < 2 or n < 2:
        raise ValueError(f"Friedman test needs k >= 2 methods and N >= 2 datasets (k={k}, N={n})")
    reranked = np.vstack([rankdata(row) for row in sub])
    mean_ranks = reranked.mean(axis=0)
    stat = 12.0 * n / (k * (k + 1)) * float(np.sum(mean_ranks**2)) - 3.0 * n * (k + 1)
    stat = max(stat, 0.0) if abs(stat) < 1e-9 else stat
    return FriedmanResult(float(stat), k, n, float(chi2.sf(stat, k - 1)),
                          int((~complete).sum()), tuple(float(r) for r in mean_ranks))


# --------------------------------------------------------------------------
# Appendix-style tables: one CSV per dataset, method rows x metric columns
# --------------------------------------------------------------------------

def load_method_table(path) -> dict:
    """``{method_id: {metric: value or None}}`` from a per-dataset results CSV.

    Method cells may hold ids (``smote``) or display names (``SMOTE``);
    ``N/A`` or empty cells become None.
    """
    out = {}
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            name = row.pop("method").strip()
            method = METHOD_BY_DISPLAY.get(name, name)
            vals = {}
            for metric, cell in row.items():
                cell = (cell or "").strip()
                vals[metric] = None if cell in ("", "N/A", "NA", "nan") else float(cell)
            out[method] = vals
    return out


def load_method_tables(directory, datasets: Sequence[str] | None = None) -> dict:
    """Load every ``*.csv`` in ``directory`` (or only the named stems), keyed by file stem."""
    directory = Path(directory)
    files = sorted(directory.glob("*.csv"))
    if datasets is not None:
        wanted = set(datasets)
        files = [f for f in files if f.stem in wanted]
        missing = wanted - {f.stem for f in files}
        if missing:
            raise FileNotFoundError(f"no table for {sorted(missing)} in {directory}")
    return {f.stem: load_method_table(f) for f in files}


def metric_column(tables: Mapping[str, Mapping[str, Mapping[str, float | None]]], metric: str) -> dict:
    return {ds: {m: vals.get(metric) for m, vals in t.items()} for ds, t in tables.items()}


def summarize_tables(tables, metrics=CURVE_METRICS, ties: str = "average") -> dict:
    """``{metric: {method: RankSummary}}`` from loaded per-dataset tables."""
    return {metric: aggregate_ranks(rank_table(metric_column(tables, metric), ties=ties))
            for metric in metrics}


# --------------------------------------------------------------------------
# Report emission
# --------------------------------------------------------------------------

def runtime_summary(records) -> dict:
    """min/mean/max resample seconds per method over records that have a time."""
    by_method: dict = {}
    for r in records:
        if r.resample_seconds is not None and r.status in ("ok", "timeout"):
            by_method.setdefault(r.method, []).append(r.resample_seconds)
    order = [m for m in METHODS if m in by_method] + sorted(set(by_method) - set(METHODS))
    return {m: {"min": min(by_method[m]), "mean": float(np.mean(by_method[m])),
                "max": max(by_method[m]), "n": len(by_method[m])} for m in order}


def emit_report(records, output_dir, metrics: Sequence[str] = CURVE_METRICS, svg: bool = True,
                ties: str = "average") -> dict:
    """Write rank CSVs, ``summary.json``, ``runtimes.csv`` and optional SVG rank plots.

    Each method is represented on each dataset by its best config for that metric.
    """
    records = list(records)
    if not records:
        raise ValueError("no records")
    for m in metrics:
        if m not in ALL_METRICS:
            raise ValueError(f"unknown metric {m!r}")
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = {}
    summary = {}
    for metric in metrics:
        best = best_per_method(records, metric)
        methods = [m for m in METHODS if any(m == r.method for r in records)]
        methods += sorted({r.method for r in records} - set(methods))
        table = rank_table(best, methods, ties=ties)
        path = out / f"ranks_{metric}.csv"
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["dataset", *table.methods])
            for ds, row in zip(table.datasets, table.ranks):
                w.writerow([ds, *("" if np.isnan(v) else f"{v:g}" for v in row)])
        written[f"ranks_{metric}"] = path
        agg = aggregate_ranks(table)
        summary[metric] = {m: asdict(s) for m, s in agg.items()}
        if svg and agg:
            svg_path = out / f"ranks_{metric}.svg"
            svg_path.write_text(rank_svg(agg, n_methods=len(table.methods), title=metric))
            written[f"svg_{metric}"] = svg_path
    spath = out / "summary.json"
    spath.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    written["summary"] = spath

    rpath = out / "runtimes.csv"
    with rpath.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "min_seconds", "mean_seconds", "max_seconds", "n"])
        for m, s in runtime_summary(records).items():
            w.writerow([m, f"{s['min']:.6f}", f"{s['mean']:.6f}", f"{s['max']:.6f}", s["n"]])
    written["runtimes"] = rpath
    return written


_MARK_STYLE = {
    "min": ("#222222", 5),
    "mean": ("#222222", 7),
    "max": ("#222222", 5),
    "p25": ("#1f77b4", 4),
    "p50": ("#1f77b4", 4),
    "p75": ("#1f77b4", 4),
}


def rank_svg(summaries: Mapping[str, RankSummary], n_methods: int | None = None,
             title: str = "") -> str:
    """Strip plot: one row per method with min/mean/max (dark) and p25/p50/p75 (blue) marks."""
    n_methods = n_methods or len(summaries)
    left, right, top, row_h = 190, 30, 40, 24
    width = 720
    height = top + row_h * len(summaries) + 40
    span = max(n_methods - 1, 1)

    def x(rank):
        return left + (rank - 1) / span * (width - left - right)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'font-family="sans-serif" font-size="12">',
        f'<text x="{width / 2:.1f}" y="20" text-anchor="middle">{_esc(title)} rank</text>',
    ]
    for i, (method, s) in enumerate(summaries.items()):
        y = top + i * row_h + row_h / 2
        name = DISPLAY_NAMES.get(method, method)
        parts.append(f'<g class="method-row" data-method="{_esc(method)}">')
        parts.append(f'<text x="{left - 10}" y="{y + 4:.1f}" text-anchor="end">'
                     f'{_esc(name)} ({s.n})</text>')
        parts.append(f'<line x1="{x(1):.1f}" y1="{y:.1f}" x2="{x(n_methods):.1f}" y2="{y:.1f}" '
                     f'stroke="#dddddd"/>')
        for mark, (colour, r) in _MARK_STYLE.items():
            parts.append(f'<circle class="mark {mark}" cx="{x(getattr(s, mark)):.1f}" '
                         f'cy="{y:.1f}" r="{r}" fill="{colour}" fill-opacity="0.8"/>')
        parts.append("</g>")
    axis_y = top + row_h * len(summaries) + 10
    for r in range(1, n_methods + 1):
        parts.append(f'<text x="{x(r):.1f}" y="{axis_y + 12}" text-anchor="middle">{r}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _esc(text) -> str:
    return (str(text).replace("&", "&amp;").replace("<", "&lt;")
            .replace(">", "&gt;").replace('"', "&quot;"))


def format_summary(summaries: Mapping[str, RankSummary]) -> str:
    lines = [f"{'method':<22} {'mean':>7} {'//':>2} {'n':>3} {'min':>6} {'p25':>6} "
             f"{'p50':>6} {'p75':>6} {'max':>6}"]
    for m, s in summaries.items():
        lines.append(f"{DISPLAY_NAMES.get(m, m):<22} {s.mean:7.3f} // {s.n:02d} {s.min:6.2f} "
                     f"{s.p25:6.2f} {s.p50:6.2f} {s.p75:6.2f} {s.max:6.2f}")
    return "\n".join(lines)
