"""Benchmark harness: method grids, single runs, batch orchestration and persistence.

One run = stratified 75/25 split -> standardisation fitted on the training
part -> resampling of the training part (timed) -> cross-validated choice of
a scoring classifier on the resampled data -> metrics on the untouched test
part.
"""

from __future__ import annotations

import csv
import itertools
import json
import logging
import math
import multiprocessing as mp
import time
import traceback
import warnings
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import oversampling as ovs
from . import undersampling as uns
from .dataset import LabeledDataset, load_csv, standardize, stratified_split
from .errors import FitError, ImbBenchError, UndefinedMetricError
from .learners import DEFAULT_CANDIDATES, select_model_cv
from .metrics import ALL_METRICS, ScoredPredictions, all_metrics

log = logging.getLogger(__name__)

TRAIN_FRACTION = 0.75
CV_FOLDS = 5
DEFAULT_BUDGET_SECONDS = 600.0

STATUSES = ("ok", "resample_error", "timeout", "metric_undefined")

METHODS = (
    "baseline",
    "random_oversampling",
    "smote",
    "borderline_smote",
    "svm_smote",
    "kmeans_smote",
    "adasyn",
    "random_undersampling",
    "cnn",
    "enn",
    "repeated_enn",
    "all_knn",
    "near_miss",
    "tomek_links",
    "one_sided_selection",
    "ncl",
    "cluster_centroids",
)

DISPLAY_NAMES = {
    "baseline": "Baseline",
    "random_oversampling": "Random Oversampling",
    "smote": "SMOTE",
    "borderline_smote": "Borderline SMOTE",
    "svm_smote": "SVM SMOTE",
    "kmeans_smote": "KMeans SMOTE",
    "adasyn": "ADASYN",
    "random_undersampling": "Random Undersampling",
    "cnn": "CNN",
    "enn": "ENN",
    "repeated_enn": "Repeated ENN",
    "all_knn": "All KNN",
    "near_miss": "Near Miss",
    "tomek_links": "Tomek Links",
    "one_sided_selection": "One-Sided Selection",
    "ncl": "NCL",
    "cluster_centroids": "Cluster Centroids",
}
METHOD_BY_DISPLAY = {v: k for k, v in DISPLAY_NAMES.items()}

_RATIOS = (0.5, 1.0)
_KS = (3, 5)
_CRITERIA = ("mode", "all")

# Parameter name -> candidate values; expansion order is the dict order.
GRIDS = {
    "baseline": {},
    "random_oversampling": {"target_ratio": _RATIOS},
    "smote": {"target_ratio": _RATIOS, "k_neighbors": _KS},
    "borderline_smote": {
        "target_ratio": _RATIOS,
        "k_neighbors": _KS,
        "m_danger_neighbors": (5, 10),
        "kind": ovs.BORDERLINE_KINDS,
    },
    "svm_smote": {"target_ratio": _RATIOS, "k_neighbors": _KS, "svm_reg_C": (0.1, 1.0)},
    "kmeans_smote": {"target_ratio": _RATIOS, "k_neighbors": _KS},
    "adasyn": {"target_ratio": _RATIOS, "k_neighbors": _KS},
    "random_undersampling": {"target_ratio": _RATIOS},
    "cnn": {"n_seeds": (1, 5)},
    "enn": {"k_neighbors": _KS, "criterion": _CRITERIA},
    "repeated_enn": {"k_neighbors": _KS, "criterion": _CRITERIA},
    "all_knn": {"k_neighbors": _KS, "criterion": _CRITERIA},
    "near_miss": {"version": (1, 2, 3), "k_neighbors": _KS, "target_ratio": _RATIOS},
    "tomek_links": {},
    "one_sided_selection": {"n_seeds": (1, 5)},
    "ncl": {"k_neighbors": _KS, "criterion": _CRITERIA, "cleaning_threshold": (0.3, 0.5)},
    "cluster_centroids": {"target_ratio": _RATIOS, "n_restarts": (1, 5)},
}

# Keys accepted (beyond the grid) when a method is called directly.
_EXTRA_KEYS = {
    "kmeans_smote": {"n_clusters", "sparsity_exponent"},
    "repeated_enn": {"max_iter"},
}

PARAM_ALIASES = {
    "ratio": "target_ratio",
    "k": "k_neighbors",
    "m": "m_danger_neighbors",
    "C": "svm_reg_C",
    "seeds": "n_seeds",
    "threshold": "cleaning_threshold",
    "restarts": "n_restarts",
}


@dataclass(frozen=True)
class MethodConfig:
    method: str
    params: tuple = ()  # sorted (name, value) pairs
    index: int = 0

    @classmethod
    def make(cls, method: str, params: dict | None = None, index: int = 0) -> "MethodConfig":
        validate_params(method, params or {})
        return cls(method, tuple(sorted((params or {}).items())), index)

    @property
    def param_dict(self) -> dict:
        return dict(self.params)

    def label(self) -> str:
        inner = ",".join(f"{k}={v}" for k, v in self.params)
        return f"{self.method}[{self.index}]({inner})"


def validate_params(method: str, params: dict):
    if method not in GRIDS:
        raise ValueError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
    allowed = set(GRIDS[method]) | _EXTRA_KEYS.get(method, set())
    unknown = set(params) - allowed
    if unknown:
        raise ValueError(
            f"{method} does not take {sorted(unknown)}; allowed: {sorted(allowed) or 'none'}"
        )


def expand_grid(method: str) -> list[MethodConfig]:
    if method not in GRIDS:
        raise ValueError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
    grid = GRIDS[method]
    names = list(grid)
    return [
        MethodConfig(method, tuple(sorted(zip(names, values))), i)
        for i, values in enumerate(itertools.product(*(grid[n] for n in names)))
    ]


def parse_params(text: str) -> dict:
    """``"k=5,ratio=1.0"`` -> ``{"k_neighbors": 5, "target_ratio": 1.0}``."""
    out = {}
    for item in filter(None, (s.strip() for s in (text or "").split(","))):
        key, sep, raw = item.partition("=")
        if not sep:
            raise ValueError(f"expected key=value, got {item!r}")
        key = PARAM_ALIASES.get(key.strip(), key.strip())
        raw = raw.strip()
        try:
            value = int(raw)
        except ValueError:
            try:
                value = float(raw)
            except ValueError:
                value = raw
        out[key] = value
    return out


def apply_method(method: str, d: LabeledDataset, params: dict | None = None, seed: int = 0) -> LabeledDataset:
    """Run one resampling method on ``d``."""
    p = dict(params or {})
    validate_params(method, p)
    if method == "baseline":
        return d
    if method == "random_oversampling":
        return ovs.random_oversample(d, p.get("target_ratio", 1.0), seed)
    if method in ("smote", "borderline_smote", "svm_smote", "kmeans_smote", "adasyn"):
        return ovs.OVERSAMPLERS[method](d, ovs.OversampleParams(**p), seed)
    if method == "random_undersampling":
        return uns.random_undersample(d, p.get("target_ratio", 1.0), seed)
    if method == "cnn":
        return uns.condensed_nn(d, p.get("n_seeds", 1), seed)
    if method in ("enn", "repeated_enn", "all_knn"):
        mode = {"enn": "single", "repeated_enn": "repeated", "all_knn": "all_knn"}[method]
        return uns.edited_nn(d, p.get("k_neighbors", 3), p.get("criterion", "mode"), mode,
                             p.get("max_iter", 100))
    if method == "near_miss":
        return uns.near_miss(d, p.get("version", 1), p.get("k_neighbors", 3),
                             p.get("target_ratio", 1.0), seed)
    if method == "tomek_links":
        return uns.tomek_links(d)
    if method == "one_sided_selection":
        return uns.one_sided_selection(d, p.get("n_seeds", 1), seed)
    if method == "ncl":
        return uns.ncl(d, p.get("k_neighbors", 3), p.get("criterion", "mode"),
                       p.get("cleaning_threshold", 0.5))
    if method == "cluster_centroids":
        return uns.cluster_centroids(d, p.get("target_ratio", 1.0), seed, p.get("n_restarts", 1))
    raise ValueError(f"unknown method {method!r}")


def derive_seed(*parts) -> int:
    """Stable 32-bit seed from a global seed plus string/int identifiers."""
    words = [p if isinstance(p, int) else zlib.crc32(str(p).encode()) for p in parts]
    return int(np.random.SeedSequence([w & 0xFFFFFFFF for w in words]).generate_state(1)[0])


@dataclass
class EvaluationRecord:
    dataset: str
    method: str
    config_index: int
    params: dict
    status: str
    metrics: dict = field(default_factory=dict)
    resample_seconds: float | None = None
    classifier: str | None = None
    seed: int = 0
    n_train: int | None = None
    message: str = ""

    def to_json(self, include_timing: bool = True) -> str:
        d = {
            "dataset": self.dataset,
            "method": self.method,
            "config_index": self.config_index,
            "params": self.params,
            "status": self.status,
            "metrics": {m: self.metrics.get(m) for m in ALL_METRICS},
            "classifier": self.classifier,
            "seed": self.seed,
            "n_train": self.n_train,
            "message": self.message,
        }
        if include_timing:
            d["resample_seconds"] = self.resample_seconds
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "EvaluationRecord":
        d = json.loads(line)
        return cls(
            dataset=d["dataset"], method=d["method"], config_index=d["config_index"],
            params=d.get("params", {}), status=d["status"],
            metrics={k: v for k, v in d.get("metrics", {}).items() if v is not None},
            resample_seconds=d.get("resample_seconds"), classifier=d.get("classifier"),
            seed=d.get("seed", 0), n_train=d.get("n_train"), message=d.get("message", ""),
        )

    @property
    def key(self):
        return (self.dataset, self.method, self.config_index)


def prepare_split(dataset: LabeledDataset, seed: int, dataset_id: str):
    """Standardised (train, test) pair; identical for every config of a dataset."""
    dataset.require_both_classes()
    split = stratified_split(dataset, TRAIN_FRACTION, derive_seed(seed, dataset_id, "split"))
    _, train, (test,) = standardize(split.train, [split.test])
    return split, train, test


def _resample_child(conn, method, train, params, seed):
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            t0 = time.perf_counter()
            out = apply_method(method, train, params, seed)
            conn.send(("ok", out, time.perf_counter() - t0))
    except ImbBenchError as exc:
        conn.send(("error", f"{type(exc).__name__}: {exc}", None))
    except Exception as exc:  # noqa: BLE001 - reported back to the parent as a failed run
        conn.send(("error", f"{type(exc).__name__}: {exc}\n{traceback.format_exc()}", None))
    finally:
        conn.close()


def timed_resample(method, train, params, seed, budget_seconds=None):
    """Return ``(status, resampled_or_message, seconds)``.

    With a finite budget and the ``fork`` start method available, the
    resampler runs in a child process that is killed once the budget runs
    out. Otherwise it runs inline and the budget is only checked afterwards.
    """
    finite = budget_seconds is not None and math.isfinite(budget_seconds)
    if finite and "fork" in mp.get_all_start_methods():
        ctx = mp.get_context("fork")
        recv, send = ctx.Pipe(duplex=False)
        proc = ctx.Process(target=_resample_child, args=(send, method, train, params, seed))
        t0 = time.perf_counter()
        proc.start()
        send.close()
        if recv.poll(budget_seconds):
            try:
                kind, payload, seconds = recv.recv()
            except EOFError:
                kind, payload, seconds = "error", "resampler process died", None
            proc.join()
        else:
            proc.kill()
            proc.join()
            return "timeout", f"resampling exceeded {budget_seconds:g} s", time.perf_counter() - t0
        recv.close()
        if kind == "ok":
            return "ok", payload, seconds
        return "resample_error", payload, seconds

    t0 = time.perf_counter()
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            out = apply_method(method, train, params, seed)
    except Exception as exc:  # noqa: BLE001 - a failing resampler must not abort the batch
        return "resample_error", f"{type(exc).__name__}: {exc}", time.perf_counter() - t0
    seconds = time.perf_counter() - t0
    if finite and seconds > budget_seconds:
        return "timeout", f"resampling took {seconds:.1f} s > {budget_seconds:g} s", seconds
    return "ok", out, seconds


def run_one(dataset: LabeledDataset, config: MethodConfig, seed: int = 0,
            budget_seconds: float | None = DEFAULT_BUDGET_SECONDS,
            dataset_id: str = "dataset") -> EvaluationRecord:
    run_seed = derive_seed(seed, dataset_id, config.method, config.index)
    record = EvaluationRecord(dataset_id, config.method, config.index, config.param_dict,
                              "ok", seed=run_seed)
    _, train, test = prepare_split(dataset, seed, dataset_id)

    status, out, seconds = timed_resample(config.method, train, config.param_dict, run_seed,
                                          budget_seconds)
    record.resample_seconds = seconds
    if status != "ok":
        record.status, record.message = status, out
        return record
    resampled = out
    record.n_train = resampled.n_samples
    if resampled.n_minority == 0 or resampled.n_majority == 0:
        record.status = "resample_error"
        record.message = "resampled training set lacks a class"
        return record

    try:
        selection = select_model_cv(resampled, DEFAULT_CANDIDATES, CV_FOLDS, run_seed)
        scores = selection.scorer.score(test.features)
        sp = ScoredPredictions(scores, test.labels)
        record.metrics = all_metrics(sp, fpr_cap=test.n_minority / test.n_samples)
        record.classifier = selection.config.name
    except (FitError, UndefinedMetricError) as exc:
        record.status = "metric_undefined"
        record.message = f"{type(exc).__name__}: {exc}"
        record.metrics = {}
    return record


# Datasets shared with worker processes through the pool initializer.
_WORKER_DATASETS: dict = {}


def _init_worker(datasets):
    _WORKER_DATASETS.clear()
    _WORKER_DATASETS.update(datasets)


def _run_task(task):
    dataset_id, config, seed, budget = task
    return run_one(_WORKER_DATASETS[dataset_id], config, seed, budget, dataset_id)


def benchmark_tasks(dataset_ids, methods, seed, budget):
    return [
        (ds, cfg, seed, budget)
        for ds in dataset_ids
        for m in methods
        for cfg in expand_grid(m)
    ]


def run_benchmark(datasets, methods=METHODS, seed: int = 0, parallelism: int = 1,
                  budget_seconds: float | None = DEFAULT_BUDGET_SECONDS,
                  progress=None) -> list[EvaluationRecord]:
    """Run every (dataset, method config) pair; records come back in task order.

    ``datasets`` maps dataset id -> LabeledDataset (or is a sequence of pairs).
    """
    datasets = dict(datasets)
    for m in methods:
        if m not in GRIDS:
            raise ValueError(f"unknown method {m!r}")
    tasks = benchmark_tasks(list(datasets), methods, seed, budget_seconds)
    records = []
    if parallelism <= 1:
        _init_worker(datasets)
        try:
            for i, t in enumerate(tasks):
                records.append(_run_task(t))
                if progress:
                    progress(i + 1, len(tasks), records[-1])
        finally:
            _WORKER_DATASETS.clear()
    else:
        with ProcessPoolExecutor(max_workers=parallelism, initializer=_init_worker,
                                 initargs=(datasets,)) as pool:
            for i, rec in enumerate(pool.map(_run_task, tasks)):
                records.append(rec)
                if progress:
                    progress(i + 1, len(tasks), rec)
    return records


# --------------------------------------------------------------------------
# Persistence
# --------------------------------------------------------------------------

RECORDS_FILE = "records.jsonl"
TIMINGS_FILE = "timings.jsonl"
RESULTS_CSV = "results.csv"


def write_records(records, output_dir) -> dict:
    """Write records, timing sidecar and flat CSV; returns the written paths.

    ``records.jsonl`` omits wall-clock times so identical runs produce
    identical bytes; times go to ``timings.jsonl`` and ``results.csv``.
    """
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"records": out / RECORDS_FILE, "timings": out / TIMINGS_FILE, "csv": out / RESULTS_CSV}
    with paths["records"].open("w") as fh:
        for r in records:
            fh.write(r.to_json(include_timing=False) + "\n")
    with paths["timings"].open("w") as fh:
        for r in records:
            fh.write(json.dumps({"dataset": r.dataset, "method": r.method,
                                 "config_index": r.config_index,
                                 "resample_seconds": r.resample_seconds}, sort_keys=True) + "\n")
    with paths["csv"].open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["dataset", "method", "config_index", "status", *ALL_METRICS, "resample_seconds"])
        for r in records:
            w.writerow([r.dataset, r.method, r.config_index, r.status,
                        *("" if r.metrics.get(m) is None else repr(r.metrics[m]) for m in ALL_METRICS),
                        "" if r.resample_seconds is None else f"{r.resample_seconds:.6f}"])
    return paths


def read_records(path) -> list[EvaluationRecord]:
    """Load a records file, merging times from a ``timings.jsonl`` next to it."""
    path = Path(path)
    records = [EvaluationRecord.from_json(line) for line in path.read_text().splitlines() if line.strip()]
    sidecar = path.with_name(TIMINGS_FILE)
    if sidecar.exists():
        times = {}
        for line in sidecar.read_text().splitlines():
            if line.strip():
                t = json.loads(line)
                times[(t["dataset"], t["method"], t["config_index"])] = t["resample_seconds"]
        for r in records:
            if r.resample_seconds is None:
                r.resample_seconds = times.get(r.key)
    return records


@dataclass
class BenchmarkConfig:
    datasets: list
    methods: tuple = METHODS
    seed: int = 0
    parallelism: int = 1
    budget_seconds: float | None = DEFAULT_BUDGET_SECONDS
    output_dir: str = "results"


def load_config(path) -> BenchmarkConfig:
    path = Path(path)
    raw = json.loads(path.read_text())
    if not raw.get("datasets"):
        raise ValueError("config needs a non-empty 'datasets' list")
    datasets = []
    for entry in raw["datasets"]:
        missing = {"id", "path", "label_column", "positive_label"} - set(entry)
        if missing:
            raise ValueError(f"dataset entry {entry} lacks {sorted(missing)}")
        p = Path(entry["path"])
        if not p.is_absolute():
            p = path.parent / p
        datasets.append({**entry, "path": str(p)})
    methods = tuple(raw.get("methods") or METHODS)
    for m in methods:
        if m not in GRIDS:
            raise ValueError(f"unknown method {m!r} in config")
    out_dir = Path(raw.get("output_dir", "results"))
    if not out_dir.is_absolute():
        out_dir = path.parent / out_dir
    budget = raw.get("budget_seconds", DEFAULT_BUDGET_SECONDS)
    return BenchmarkConfig(datasets, methods, int(raw.get("seed", 0)),
                           int(raw.get("parallelism", 1)),
                           None if budget is None else float(budget), str(out_dir))


def run_from_config(cfg: BenchmarkConfig, progress=None):
    datasets = {}
    for entry in cfg.datasets:
        d, n_imputed = load_csv(entry["path"], entry["label_column"], entry["positive_label"])
        if n_imputed:
            log.warning("%s: imputed %d missing cells with column means", entry["id"], n_imputed)
        datasets[entry["id"]] = d
    records = run_benchmark(datasets, cfg.methods, cfg.seed, cfg.parallelism,
                            cfg.budget_seconds, progress=progress)
    paths = write_records(records, cfg.output_dir)
    return records, paths


def best_per_method(records, metric: str, higher_is_better: bool = True) -> dict:
    """``{dataset: {method: best score over that method's ok configs}}``.

    Datasets where a method has no successful config simply lack that method.
    """
    if metric not in ALL_METRICS:
        raise ValueError(f"unknown metric {metric!r}")
    best: dict = {}
    for r in records:
        v = r.metrics.get(metric) if r.status == "ok" else None
        if v is None or (isinstance(v, float) and math.isnan(v)):
            continue
        row = best.setdefault(r.dataset, {})
        cur = row.get(r.method)
        if cur is None or (v > cur if higher_is_better else v < cur):
            row[r.method] = v
    return best

