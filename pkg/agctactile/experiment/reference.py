"""
Published best configurations and test results of the three architecture families.

These come from full-scale models trained on real sensor images; they are fixtures for
the report format and the default hyperparameters of `train` when no search has been
run, never targets for the simulated pipeline.
"""

from __future__ import annotations

from typing import Any, Final, Mapping
from dataclasses import dataclass
from importlib import resources
import json

from agctactile.constants import BASELINE_RESOURCE
from agctactile.experiment.metrics import MetricsReport
from agctactile.experiment.search import HyperParams
from agctactile.nn.models import REFERENCE_PARAMETER_COUNTS
from agctactile.types import Arch, OptimizerKind, ScheduleKind

REFERENCE_CONFIGS: Final[dict[Arch, HyperParams]] = {
    Arch.DILATED_RESNET: HyperParams(
        lr=0.06308, schedule=ScheduleKind.COSINE, optimizer=OptimizerKind.SGD, weight_decay=0.00338
    ),
    Arch.RESNET_BASELINE: HyperParams(
        lr=0.07825, schedule=ScheduleKind.STEP, optimizer=OptimizerKind.ADABOUND, weight_decay=0.00324
    ),
    Arch.ALEXNET_BASELINE: HyperParams(
        lr=0.00527, schedule=ScheduleKind.STEP, optimizer=OptimizerKind.SGD, weight_decay=0.04663
    ),
}

REFERENCE_METRICS: Final[dict[Arch, MetricsReport]] = {
    Arch.DILATED_RESNET: MetricsReport(accuracy=0.9667, precision=0.9656, recall=0.9692, f1=0.9673, auc=0.9990),
    Arch.RESNET_BASELINE: MetricsReport(accuracy=0.8333, precision=0.8685, recall=0.8175, f1=0.8422, auc=0.9879),
    Arch.ALEXNET_BASELINE: MetricsReport(accuracy=0.9600, precision=0.9631, recall=0.9550, f1=0.9591, auc=0.9983),
}

__all__ = [
    "REFERENCE_CONFIGS",
    "REFERENCE_METRICS",
    "REFERENCE_PARAMETER_COUNTS",
    "LearningSignalBaseline",
    "load_baseline",
    "reference_hyperparams",
]


def reference_hyperparams(arch: Arch) -> HyperParams:
    return REFERENCE_CONFIGS[arch]


@dataclass(frozen=True, slots=True)
class LearningSignalBaseline:
    """
    Floor on the simulated pipeline's test accuracy, and the value a pilot run achieved.

    The floor only certifies that the synthetic images carry class signal; it is far below
    the published figures above.
    """

    arch: Arch
    min_accuracy: float
    achieved_accuracy: float | None = None

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> LearningSignalBaseline:
        achieved = data.get("achieved_accuracy")
        return cls(Arch(data["arch"]), float(data["min_accuracy"]), None if achieved is None else float(achieved))

    def met_by(self, accuracy: float) -> bool:
        return accuracy >= self.min_accuracy


def load_baseline() -> LearningSignalBaseline:
    text = resources.files("agctactile.experiment").joinpath(BASELINE_RESOURCE).read_text(encoding="utf-8")
    return LearningSignalBaseline.from_dict(json.loads(text)["learning_signal"])
