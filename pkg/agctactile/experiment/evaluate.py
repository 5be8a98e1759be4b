"""Score a saved checkpoint on the test split and write its report and confusion matrix."""

from __future__ import annotations

from typing import Any, Mapping
from pathlib import Path
import logging

import numpy as np
import numpy.typing as npt

from agctactile.augment import Standardizer
from agctactile.constants import CONFUSION_PLOT_STEM, REPORT_FILE
from agctactile.dataset import ImageSet
from agctactile.errors import LengthMismatch
from agctactile.experiment.metrics import MetricsReport, compute_metrics, most_confused_pair
from agctactile.experiment.plots import render_confusion
from agctactile.experiment.reference import REFERENCE_METRICS
from agctactile.nn import Classifier, load_checkpoint
from agctactile.types import BorrmannClass
from agctactile.utils import write_json

logger = logging.getLogger(__name__)


def predict(
    model: Classifier, images: ImageSet, standardizer: Standardizer, batch_size: int = 64
) -> tuple[npt.NDArray[np.int64], npt.NDArray[np.int64], npt.NDArray[np.float64]]:
    """(true labels, predicted labels, class probabilities) in eval mode."""
    scores = model.predict_proba(standardizer(images.images, dtype=model.dtype), batch_size).astype(np.float64)
    return images.labels, scores.argmax(axis=1).astype(np.int64), scores


def evaluate_final(
    checkpoint_path: Path,
    test_set: ImageSet,
    out_dir: Path,
    config_echo: Mapping[str, Any] | None = None,
) -> MetricsReport:
    """
    Test images only go through the resize done at load time; the standardization stored
    with the checkpoint is reused.

    Raises:
        MissingCheckpoint: no checkpoint at checkpoint_path
        LengthMismatch: the test split is empty
    """
    model, checkpoint = load_checkpoint(checkpoint_path)
    if len(test_set) == 0:
        msg = "The test split holds no images"
        raise LengthMismatch(msg)
    standardizer = checkpoint.standardizer or Standardizer.identity()
    y_true, y_pred, scores = predict(model, test_set, standardizer)
    report = compute_metrics(y_true, y_pred, scores, model.config.num_classes)
    arch = model.config.arch
    pair = most_confused_pair(report.confusion)
    write_json(
        out_dir / REPORT_FILE,
        {
            "arch": arch.value,
            "checkpoint": str(checkpoint_path),
            "parameter_count": model.parameter_count,
            "metrics": report.to_dict(),
            "most_confused_pair": [BorrmannClass.from_label(i).value for i in pair],
            "reference_metrics": REFERENCE_METRICS[arch].summary(),
            "config": dict(config_echo or {}),
        },
    )
    render_confusion(
        report.confusion_normalized,
        [BorrmannClass.from_label(i).value for i in range(model.config.num_classes)],
        f"{arch.value} (accuracy {report.accuracy:.3f})",
        out_dir / CONFUSION_PLOT_STEM,
    )
    logger.info(
        "%s on %d test images: A=%.4f P=%.4f Re=%.4f F1=%.4f AUC=%.4f",
        arch.value,
        len(test_set),
        report.accuracy,
        report.precision,
        report.recall,
        report.f1,
        report.auc,
    )
    return report
