"""Resampling methods for imbalanced binary classification and a benchmark around them."""

from .benchmark import (
    METHODS,
    EvaluationRecord,
    MethodConfig,
    apply_method,
    expand_grid,
    run_benchmark,
    run_one,
)
from .dataset import LabeledDataset, imbalance_stats, load_csv, stratified_split
from .errors import ImbBenchError, ResampleError, ResampleWarning, UndefinedMetricError
from .metrics import all_metrics, partial_roc_auc, pr_auc, roc_auc

__version__ = "0.1.0"
