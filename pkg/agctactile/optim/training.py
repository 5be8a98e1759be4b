"""
Epoch training loop with validation-loss early stopping.

Each epoch shuffles the training images with a generator seeded by (run seed, epoch),
augments them batch by batch, steps the optimizer at the scheduled rate and scores the
validation set in eval mode. The run stops once validation loss has failed to improve by
at least min_delta for `patience` consecutive epochs, and the best epoch's weights are
restored before returning.
"""

from __future__ import annotations

from typing import Any, Mapping
from dataclasses import dataclass, field
import logging
import math
import time

from more_itertools import chunked
import numpy as np
import numpy.typing as npt

from agctactile.augment import AugmentConfig, Standardizer, augment_batch
from agctactile.constants import EARLY_STOP_PATIENCE, IMPROVEMENT_EPSILON, MAX_EPOCHS
from agctactile.dataset import ImageSet
from agctactile.errors import InvalidConfig, NonFiniteGradient
from agctactile.nn.layers import softmax_cross_entropy
from agctactile.nn.models import Classifier
from agctactile.optim.optimizers import Optimizer, OptimizerSpec
from agctactile.optim.schedulers import Scheduler, ScheduleSpec
from agctactile.utils import derive_seed, pretty_print_duration

logger = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class TrainingConfig:
    max_epochs: int = MAX_EPOCHS
    patience: int = EARLY_STOP_PATIENCE
    batch_size: int = 32
    min_delta: float = IMPROVEMENT_EPSILON
    augment: bool = True

    def __post_init__(self) -> None:
        if self.max_epochs < 1 or self.patience < 1 or self.batch_size < 2:
            msg = (
                "max_epochs and patience must be >= 1, batch_size >= 2; "
                f"got {self.max_epochs}, {self.patience}, {self.batch_size}"
            )
            raise InvalidConfig(msg)

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> TrainingConfig:
        return cls(
            max_epochs=int(data["max_epochs"]),
            patience=int(data["patience"]),
            batch_size=int(data["batch_size"]),
            min_delta=float(data["min_delta"]),
            augment=bool(data["augment"]),
        )


@dataclass(frozen=True, slots=True)
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float
    lr: float


@dataclass(slots=True)
class TrainState:
    epoch: int = 0
    best_val_loss: float = math.inf
    best_epoch: int = -1
    epochs_since_improve: int = 0
    history: list[EpochRecord] = field(default_factory=list)
    stop_reason: str = ""
    wall_time: float = 0.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "epochs_completed": len(self.history),
            "best_val_loss": self.best_val_loss,
            "best_epoch": self.best_epoch,
            "epochs_since_improve": self.epochs_since_improve,
            "stop_reason": self.stop_reason,
            "wall_time": self.wall_time,
            "history": [
                {
                    "epoch": record.epoch,
                    "train_loss": record.train_loss,
                    "train_acc": record.train_acc,
                    "val_loss": record.val_loss,
                    "val_acc": record.val_acc,
                    "lr": record.lr,
                }
                for record in self.history
            ],
        }


@dataclass(slots=True)
class TrainResult:
    model: Classifier
    state: TrainState
    standardizer: Standardizer
    optimizer: OptimizerSpec
    schedule: ScheduleSpec

    def record(self) -> dict[str, Any]:
        return {
            "model": self.model.config.to_dict(),
            "parameter_count": self.model.parameter_count,
            "optimizer": self.optimizer.to_dict(),
            "schedule": self.schedule.to_dict(),
            "standardizer": self.standardizer.to_dict(),
            **self.state.to_dict(),
        }


def evaluate_loss(
    model: Classifier, inputs: npt.NDArray[Any], labels: npt.NDArray[np.int64], batch_size: int = 64
) -> tuple[float, float]:
    """Eval-mode mean cross-entropy and accuracy."""
    if len(labels) == 0:
        return math.nan, math.nan
    total_loss = 0.0
    correct = 0
    for start in range(0, len(labels), batch_size):
        logits = model.forward(inputs[start : start + batch_size])
        batch_labels = labels[start : start + batch_size]
        loss, _ = softmax_cross_entropy(logits, batch_labels)
        total_loss += loss * len(batch_labels)
        correct += int(np.sum(logits.argmax(axis=1) == batch_labels))
    return total_loss / len(labels), correct / len(labels)


def train(
    model: Classifier,
    train_set: ImageSet,
    val_set: ImageSet,
    optimizer_spec: OptimizerSpec,
    schedule_spec: ScheduleSpec,
    run_seed: int,
    cfg: TrainingConfig | None = None,
    augment_cfg: AugmentConfig | None = None,
    standardizer: Standardizer | None = None,
) -> TrainResult:
    """
    Train in place and return the model restored to its best validation epoch.

    Raises:
        NonFiniteGradient: a loss or gradient turned NaN/Inf
    """
    cfg = cfg or TrainingConfig()
    augment_cfg = augment_cfg or AugmentConfig()
    standardizer = standardizer or Standardizer.fit(train_set.images)
    optimizer = Optimizer(optimizer_spec, model.parameters())
    scheduler = Scheduler(schedule_spec, optimizer_spec.lr)
    val_inputs = standardizer(val_set.images, dtype=model.dtype)
    state = TrainState()
    best_weights = model.state()
    started = time.monotonic()

    for epoch in range(cfg.max_epochs):
        state.epoch = epoch
        lr = scheduler.lr(epoch)
        order = np.random.default_rng(derive_seed(run_seed, "shuffle", epoch)).permutation(len(train_set))
        seen = 0
        loss_sum = 0.0
        correct = 0
        for batch in chunked(order, cfg.batch_size):
            # batch statistics are undefined for a single trailing image
            if len(batch) < 2:
                continue
            index = np.asarray(batch)
            images = train_set.images[index]
            if cfg.augment:
                images = np.stack(augment_batch(images, augment_cfg, run_seed, epoch, batch))
            labels = train_set.labels[index]
            model.zero_grad()
            loss, logits = model.forward_loss(standardizer(images, dtype=model.dtype), labels, training=True)
            if not math.isfinite(loss):
                msg = f"Training loss became {loss} at epoch {epoch}"
                raise NonFiniteGradient(msg)
            model.backward()
            optimizer.step(lr)
            seen += len(batch)
            loss_sum += loss * len(batch)
            correct += int(np.sum(logits.argmax(axis=1) == labels))

        val_loss, val_acc = evaluate_loss(model, val_inputs, val_set.labels, cfg.batch_size)
        record = EpochRecord(
            epoch=epoch,
            train_loss=loss_sum / seen if seen else math.nan,
            train_acc=correct / seen if seen else math.nan,
            val_loss=val_loss,
            val_acc=val_acc,
            lr=lr,
        )
        state.history.append(record)
        scheduler.observe(epoch, val_loss)
        logger.info(
            "Epoch %d: train loss %.4f acc %.3f, val loss %.4f acc %.3f, lr %.3g",
            epoch + 1,
            record.train_loss,
            record.train_acc,
            val_loss,
            val_acc,
            lr,
        )

        if val_loss < state.best_val_loss - cfg.min_delta:
            state.best_val_loss = val_loss
            state.best_epoch = epoch
            state.epochs_since_improve = 0
            best_weights = model.state()
        else:
            state.epochs_since_improve += 1
            if state.epochs_since_improve >= cfg.patience:
                state.stop_reason = "early_stopping"
                break
    else:
        state.stop_reason = "max_epochs"

    model.load_state(best_weights)
    state.wall_time = time.monotonic() - started
    logger.info(
        "Training stopped after %d epochs (%s), best val loss %.4f at epoch %d, took %s",
        len(state.history),
        state.stop_reason,
        state.best_val_loss,
        state.best_epoch + 1,
        pretty_print_duration(state.wall_time),
    )
    return TrainResult(model, state, standardizer, optimizer_spec, schedule_spec)
