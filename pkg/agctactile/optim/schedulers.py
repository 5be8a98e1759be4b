"""
Per-epoch learning-rate schedules.

- step: base * gamma ** (epoch // step_size)
- cosine: eta_min + (base - eta_min) (1 + cos(pi epoch / t_max)) / 2, held at eta_min after t_max
- onecycle: linear warm-up from base / div to base over pct_start * t_max epochs, then cosine
  down to base / final_div at t_max
- plateau: multiply the current rate by factor after `patience` epochs without improvement
"""

from __future__ import annotations

from typing import Any, Mapping
from dataclasses import dataclass
import logging
import math

from agctactile.constants import IMPROVEMENT_EPSILON
from agctactile.errors import InvalidConfig, MissingValLoss
from agctactile.types import ScheduleKind

logger = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class ScheduleSpec:
    kind: ScheduleKind = ScheduleKind.COSINE
    step_size: int = 10
    gamma: float = 0.5
    factor: float = 0.1
    patience: int = 5
    pct_start: float = 0.3
    div: float = 25.0
    final_div: float = 1e4
    t_max: int = 50
    eta_min: float = 0.0

    def __post_init__(self) -> None:
        if not (0 < self.gamma <= 1 and 0 < self.factor <= 1 and 0 < self.pct_start <= 1):
            msg = f"gamma, factor and pct_start must be in (0, 1], got {self.gamma}, {self.factor}, {self.pct_start}"
            raise InvalidConfig(msg)
        if self.patience < 1 or self.t_max < 1 or self.step_size < 1:
            msg = "patience, t_max and step_size must be at least 1"
            raise InvalidConfig(msg)
        if self.div < 1 or self.final_div < 1 or self.eta_min < 0:
            msg = "div and final_div must be at least 1, eta_min non-negative"
            raise InvalidConfig(msg)

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> ScheduleSpec:
        return cls(
            kind=ScheduleKind(data.get("kind", ScheduleKind.COSINE.value)),
            step_size=int(data.get("step_size", 10)),
            gamma=float(data.get("gamma", 0.5)),
            factor=float(data.get("factor", 0.1)),
            patience=int(data.get("patience", 5)),
            pct_start=float(data.get("pct_start", 0.3)),
            div=float(data.get("div", 25.0)),
            final_div=float(data.get("final_div", 1e4)),
            t_max=int(data.get("t_max", 50)),
            eta_min=float(data.get("eta_min", 0.0)),
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind.value,
            "step_size": self.step_size,
            "gamma": self.gamma,
            "factor": self.factor,
            "patience": self.patience,
            "pct_start": self.pct_start,
            "div": self.div,
            "final_div": self.final_div,
            "t_max": self.t_max,
            "eta_min": self.eta_min,
        }


@dataclass(slots=True)
class PlateauState:
    lr: float
    best: float = math.inf
    bad_epochs: int = 0

    def observe(self, val_loss: float, spec: ScheduleSpec) -> float:
        if val_loss < self.best - IMPROVEMENT_EPSILON:
            self.best = val_loss
            self.bad_epochs = 0
        else:
            self.bad_epochs += 1
            if self.bad_epochs >= spec.patience:
                self.lr *= spec.factor
                self.bad_epochs = 0
                logger.info("Validation loss plateaued, reducing lr to %.3g", self.lr)
        return self.lr


def _cosine(start: float, end: float, progress: float) -> float:
    return end + 0.5 * (start - end) * (1.0 + math.cos(math.pi * min(max(progress, 0.0), 1.0)))


def scheduled_lr(
    spec: ScheduleSpec,
    base_lr: float,
    epoch: int,
    val_loss: float | None = None,
    plateau: PlateauState | None = None,
) -> float:
    """
    Learning rate for epoch (0-based).

    For plateau, val_loss is the loss of the epoch that just finished and plateau carries
    the running state; the returned rate applies to the next epoch.

    Raises:
        MissingValLoss: plateau scheduling without a validation loss
    """
    match spec.kind:
        case ScheduleKind.STEP:
            return base_lr * spec.gamma ** (epoch // spec.step_size)
        case ScheduleKind.COSINE:
            return _cosine(base_lr, spec.eta_min, epoch / spec.t_max)
        case ScheduleKind.ONECYCLE:
            warmup = spec.pct_start * spec.t_max
            start = base_lr / spec.div
            if epoch < warmup:
                return start + (base_lr - start) * epoch / warmup
            remaining = spec.t_max - warmup
            progress = 1.0 if remaining <= 0 else (epoch - warmup) / remaining
            return _cosine(base_lr, base_lr / spec.final_div, progress)
        case ScheduleKind.PLATEAU:
            if val_loss is None:
                msg = f"Plateau schedule needs the validation loss of epoch {epoch}"
                raise MissingValLoss(msg)
            state = plateau if plateau is not None else PlateauState(base_lr)
            return state.observe(val_loss, spec)
    msg = f"Unknown schedule {spec.kind}"
    raise InvalidConfig(msg)


class Scheduler:
    """Learning-rate source for the training loop: lr(epoch) before an epoch, observe() after it."""

    def __init__(self, spec: ScheduleSpec, base_lr: float) -> None:
        self.spec = spec
        self.base_lr = base_lr
        self.plateau = PlateauState(base_lr) if spec.kind == ScheduleKind.PLATEAU else None

    def lr(self, epoch: int) -> float:
        if self.plateau is not None:
            return self.plateau.lr
        return scheduled_lr(self.spec, self.base_lr, epoch)

    def observe(self, epoch: int, val_loss: float | None) -> None:
        if self.plateau is not None:
            scheduled_lr(self.spec, self.base_lr, epoch, val_loss, self.plateau)
