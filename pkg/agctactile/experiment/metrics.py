"""
Macro-averaged classification metrics.

Precision, recall and F1 are computed one-vs-rest per class with 0/0 taken as 0, then
averaged without weights. AUC is the one-vs-rest ROC area of each class's score column;
classes that have no positives or no negatives among the samples are left out of the
macro average.
"""

from __future__ import annotations

from typing import Any, Mapping, Sequence
from dataclasses import dataclass, field
import math

from sklearn.metrics import accuracy_score, confusion_matrix, precision_recall_fscore_support, roc_auc_score
import numpy as np
import numpy.typing as npt

from agctactile.constants import NUM_CLASSES
from agctactile.errors import LengthMismatch, UnknownClassLabel
from agctactile.types import BorrmannClass


@dataclass(slots=True)
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    auc: float
    confusion: list[list[int]] = field(default_factory=list)
    confusion_normalized: list[list[float]] = field(default_factory=list)
    per_class: dict[str, dict[str, float]] = field(default_factory=dict)
    support: int = 0

    def summary(self) -> dict[str, float]:
        return {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "auc": self.auc,
        }

    def to_dict(self) -> dict[str, Any]:
        return {
            **self.summary(),
            "confusion": self.confusion,
            "confusion_normalized": self.confusion_normalized,
            "per_class": self.per_class,
            "support": self.support,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> MetricsReport:
        def number(value: Any) -> float:
            return math.nan if value is None else float(value)

        return cls(
            accuracy=number(data["accuracy"]),
            precision=number(data["precision"]),
            recall=number(data["recall"]),
            f1=number(data["f1"]),
            auc=number(data["auc"]),
            confusion=[[int(v) for v in row] for row in data.get("confusion", [])],
            confusion_normalized=[[float(v) for v in row] for row in data.get("confusion_normalized", [])],
            per_class={
                name: {key: number(value) for key, value in values.items()}
                for name, values in data.get("per_class", {}).items()
            },
            support=int(data.get("support", 0)),
        )


def _check_labels(labels: npt.NDArray[np.int64], num_classes: int, what: str) -> None:
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        unknown = sorted({int(v) for v in labels if not 0 <= v < num_classes})
        msg = f"{what} labels outside [0, {num_classes}): {unknown}"
        raise UnknownClassLabel(msg)


def row_normalize(matrix: npt.NDArray[Any]) -> npt.NDArray[np.float64]:
    """Each row divided by its sum; rows that sum to zero stay zero."""
    totals = matrix.sum(axis=1, keepdims=True).astype(np.float64)
    return np.divide(matrix, totals, out=np.zeros(matrix.shape, dtype=np.float64), where=totals > 0)


def per_class_auc(y_true: npt.NDArray[np.int64], scores: npt.NDArray[np.float64], num_classes: int) -> list[float]:
    """One-vs-rest ROC AUC per class; NaN where the class is all-positive or all-negative."""
    aucs = []
    for label in range(num_classes):
        positives = y_true == label
        if positives.all() or not positives.any():
            aucs.append(math.nan)
        else:
            aucs.append(float(roc_auc_score(positives, scores[:, label])))
    return aucs


def compute_metrics(
    y_true: Sequence[int] | npt.NDArray[Any],
    y_pred: Sequence[int] | npt.NDArray[Any],
    scores: npt.NDArray[Any] | None = None,
    num_classes: int = NUM_CLASSES,
) -> MetricsReport:
    """
    Raises:
        LengthMismatch: empty input, or true/predicted/score lengths disagree
        UnknownClassLabel: a label outside [0, num_classes)
    """
    truth = np.asarray(y_true, dtype=np.int64)
    predicted = np.asarray(y_pred, dtype=np.int64)
    if truth.size == 0 or truth.shape != predicted.shape:
        msg = f"Need equally long non-empty label arrays, got {truth.size} true and {predicted.size} predicted"
        raise LengthMismatch(msg)
    _check_labels(truth, num_classes, "True")
    _check_labels(predicted, num_classes, "Predicted")
    if scores is None:
        # hard predictions as degenerate scores
        scores = np.eye(num_classes)[predicted]
    scores = np.asarray(scores, dtype=np.float64)
    if scores.shape != (truth.size, num_classes):
        msg = f"Scores must have shape {(truth.size, num_classes)}, got {scores.shape}"
        raise LengthMismatch(msg)

    labels = list(range(num_classes))
    precision, recall, f1, support = precision_recall_fscore_support(
        truth, predicted, labels=labels, average=None, zero_division=0
    )
    aucs = per_class_auc(truth, scores, num_classes)
    valid_aucs = [auc for auc in aucs if not math.isnan(auc)]
    matrix = confusion_matrix(truth, predicted, labels=labels)
    names = [BorrmannClass.from_label(label).value if num_classes == NUM_CLASSES else str(label) for label in labels]
    return MetricsReport(
        accuracy=float(accuracy_score(truth, predicted)),
        precision=float(np.mean(precision)),
        recall=float(np.mean(recall)),
        f1=float(np.mean(f1)),
        auc=float(np.mean(valid_aucs)) if valid_aucs else math.nan,
        confusion=matrix.astype(int).tolist(),
        confusion_normalized=row_normalize(matrix).tolist(),
        per_class={
            name: {
                "precision": float(precision[i]),
                "recall": float(recall[i]),
                "f1": float(f1[i]),
                "auc": aucs[i],
                "support": int(support[i]),
            }
            for i, name in enumerate(names)
        },
        support=int(truth.size),
    )


def most_confused_pair(confusion: Sequence[Sequence[float]]) -> tuple[int, int]:
    """
    Unordered class pair (i < j) with the largest combined row-normalized confusion
    in both directions.
    """
    normalized = row_normalize(np.asarray(confusion, dtype=np.float64))
    symmetric = normalized + normalized.T
    np.fill_diagonal(symmetric, -np.inf)
    i, j = np.unravel_index(int(np.argmax(symmetric)), symmetric.shape)
    return (int(min(i, j)), int(max(i, j)))
