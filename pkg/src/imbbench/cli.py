"""Command line entry point: ``bench run|report|resample|metrics``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .benchmark import (METHODS, apply_method, best_per_method, load_config, parse_params,
                        read_records, run_from_config)
from .dataset import load_csv, write_csv
from .errors import ImbBenchError
from .metrics import ALL_METRICS, CURVE_METRICS, ScoredPredictions, all_metrics
from .report import aggregate_ranks, emit_report, format_summary, rank_table


def _cmd_run(args) -> int:
    cfg = load_config(args.config)

    def progress(done, total, _record=None):
        if args.verbose:
            print(f"\r{done}/{total} runs", end="", file=sys.stderr, flush=True)

    records, paths = run_from_config(cfg, progress=progress)
    if args.verbose:
        print(file=sys.stderr)
    counts: dict = {}
    for r in records:
        counts[r.status] = counts.get(r.status, 0) + 1
    print(f"{len(records)} records -> {paths['records']}")
    for status, n in sorted(counts.items()):
        print(f"  {status}: {n}")
    return 0


def _cmd_report(args) -> int:
    records = read_records(args.records)
    metrics = args.metric or list(CURVE_METRICS)
    out = Path(args.out) if args.out else Path(args.records).parent / "report"
    emit_report(records, out, metrics, svg=not args.no_svg)
    for metric in metrics:
        table = rank_table(best_per_method(records, metric))
        print(f"[{metric}]")
        print(format_summary(aggregate_ranks(table)))
    print(f"report written to {out}")
    return 0


def _cmd_resample(args) -> int:
    d, n_imputed = load_csv(args.input, args.label_column, args.positive_label)
    if n_imputed:
        logging.warning("imputed %d missing cells with column means", n_imputed)
    out = apply_method(args.method, d, parse_params(args.params), args.seed)
    write_csv(out, args.output, label_column=args.label_column)
    print(f"{d.n_samples} rows ({d.n_minority} minority) -> "
          f"{out.n_samples} rows ({out.n_minority} minority)")
    return 0


def _cmd_metrics(args) -> int:
    scores, labels = [], []
    with open(args.scores, newline="") as fh:
        for row in csv.DictReader(fh):
            scores.append(float(row["score"]))
            labels.append(int(row["label"]))
    sp = ScoredPredictions(np.array(scores), np.array(labels))
    cap = args.fpr_cap if args.fpr_cap is not None else sp.n_pos / len(labels)
    result = all_metrics(sp, fpr_cap=cap, threshold=args.threshold)
    print(json.dumps({m: result[m] for m in ALL_METRICS}, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bench", description="Class-imbalance resampling benchmark")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a benchmark from a JSON config")
    r.add_argument("--config", required=True)
    r.set_defaults(func=_cmd_run)

    rep = sub.add_parser("report", help="rank tables, summaries and plots from a records file")
    rep.add_argument("--records", required=True)
    rep.add_argument("--metric", action="append", choices=ALL_METRICS,
                     help="repeatable; defaults to the three curve metrics")
    rep.add_argument("--out")
    rep.add_argument("--no-svg", action="store_true")
    rep.set_defaults(func=_cmd_report)

    rs = sub.add_parser("resample", help="apply one resampling method to a CSV")
    rs.add_argument("--method", required=True, choices=METHODS)
    rs.add_argument("--params", default="", help="e.g. k=5,ratio=1.0")
    rs.add_argument("--in", dest="input", required=True)
    rs.add_argument("--out", dest="output", required=True)
    rs.add_argument("--seed", type=int, default=0)
    rs.add_argument("--label-column", default="label")
    rs.add_argument("--positive-label", default="1")
    rs.set_defaults(func=_cmd_resample)

    m = sub.add_parser("metrics", help="metrics from a CSV with score,label columns")
    m.add_argument("--scores", required=True)
    m.add_argument("--fpr-cap", type=float, help="defaults to the positive prevalence")
    m.add_argument("--threshold", type=float, default=0.5)
    m.set_defaults(func=_cmd_metrics)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ImbBenchError, ValueError, OSError, KeyError) as exc:
        print(f"bench: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
