"""
Hyperparameter search, cross-validation and evaluation of the trained classifiers.

- metrics: macro accuracy/precision/recall/F1/AUC and confusion matrices
- search: random search over optimizer, schedule, learning rate and weight decay
- kfold: tumor-level stratified cross-validation and its accuracy curves
- evaluate: test-split scoring of a saved checkpoint
- reference: published configurations and results kept as fixtures, plus the accuracy floor
  the simulated pipeline must clear
- report: side-by-side comparison of every evaluated architecture
"""

from .evaluate import evaluate_final, predict
from .kfold import CrossValidationResult, run_cross_validation, stratified_kfold
from .metrics import MetricsReport, compute_metrics, most_confused_pair
from .reference import (
    REFERENCE_CONFIGS,
    REFERENCE_METRICS,
    LearningSignalBaseline,
    load_baseline,
    reference_hyperparams,
)
from .report import build_comparison
from .search import (
    HyperParams,
    SearchContext,
    SearchResult,
    SearchRun,
    run_random_search,
    sample_hyperparams,
    select_config,
    validation_split,
)

__all__ = [
    "REFERENCE_CONFIGS",
    "REFERENCE_METRICS",
    "CrossValidationResult",
    "HyperParams",
    "LearningSignalBaseline",
    "MetricsReport",
    "SearchContext",
    "SearchResult",
    "SearchRun",
    "build_comparison",
    "compute_metrics",
    "evaluate_final",
    "load_baseline",
    "most_confused_pair",
    "predict",
    "reference_hyperparams",
    "run_cross_validation",
    "run_random_search",
    "sample_hyperparams",
    "select_config",
    "stratified_kfold",
    "validation_split",
]
