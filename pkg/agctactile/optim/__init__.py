"""
Optimizers, learning-rate schedules and the early-stopping training loop.
"""

from .optimizers import Optimizer, OptimizerSpec, adabound_bounds, optimizer_step
from .schedulers import PlateauState, Scheduler, ScheduleSpec, scheduled_lr
from .training import EpochRecord, TrainingConfig, TrainResult, TrainState, evaluate_loss, train

__all__ = [
    "EpochRecord",
    "Optimizer",
    "OptimizerSpec",
    "PlateauState",
    "ScheduleSpec",
    "Scheduler",
    "TrainResult",
    "TrainState",
    "TrainingConfig",
    "adabound_bounds",
    "evaluate_loss",
    "optimizer_step",
    "scheduled_lr",
    "train",
]
