"""
Enumerations shared by several stages.

- Borrmann tumor classes and their integer labels
- Dataset splits
- Network architectures, optimizers and learning-rate schedules
"""

from __future__ import annotations

from enum import Enum


class BorrmannClass(Enum):
    """
    The four Borrmann types of advanced gastric cancer.

    Attributes:
        I: Polypoid or fungating mass
        II: Ulcerated carcinoma with a sharp raised rim, no infiltration
        III: Ulcerated carcinoma infiltrating the surrounding mucosa
        IV: Diffusely infiltrating, nearly flat carcinoma
    """

    I = "I"  # noqa: E741
    II = "II"
    III = "III"
    IV = "IV"

    @property
    def label(self) -> int:
        """Integer class index used by the classifiers."""
        return _CLASS_ORDER.index(self)

    @classmethod
    def from_label(cls, label: int) -> BorrmannClass:
        return _CLASS_ORDER[label]


_CLASS_ORDER: list[BorrmannClass] = [BorrmannClass.I, BorrmannClass.II, BorrmannClass.III, BorrmannClass.IV]


class Split(Enum):
    TRAIN = "train"
    TEST = "test"
    UNASSIGNED = "unassigned"


class Arch(Enum):
    DILATED_RESNET = "dilated_resnet"
    RESNET_BASELINE = "resnet_baseline"
    ALEXNET_BASELINE = "alexnet_baseline"


class OptimizerKind(Enum):
    SGD = "sgd"
    ADAM = "adam"
    ADABOUND = "adabound"


class ScheduleKind(Enum):
    STEP = "step"
    PLATEAU = "plateau"
    ONECYCLE = "onecycle"
    COSINE = "cosine"
