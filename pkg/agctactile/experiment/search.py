"""
Random hyperparameter search.

Every sampled configuration trains the same architecture on the same tumor-level
train/validation split. The winner minimizes validation loss among the configurations
whose train/validation accuracy gap stays within overfit_gap (all of them, if none
does); near-ties go to the smaller gap, then to the earlier configuration.
"""

from __future__ import annotations

from typing import Any, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
import logging
import math

import numpy as np
import pandas as pd

from agctactile.augment import AugmentConfig, Standardizer
from agctactile.constants import (
    IMPROVEMENT_EPSILON,
    LR_MAX,
    LR_MIN,
    OVERFIT_GAP,
    RESULTS_TABLE_FILE,
    SEARCH_FILE,
    SWEEP_PLOT_FILE,
    WEIGHT_DECAY_MAX,
)
from agctactile.dataset import ImageSet
from agctactile.errors import AgcSimException, InsufficientPhantoms, InvalidConfig
from agctactile.experiment.plots import plot_search_sweep
from agctactile.nn.models import ModelConfig, build_model
from agctactile.optim import OptimizerSpec, ScheduleSpec, TrainingConfig, TrainResult, evaluate_loss, train
from agctactile.primitives import PhantomId
from agctactile.types import Arch, OptimizerKind, ScheduleKind
from agctactile.utils import derive_seed, read_json, write_json

logger = logging.getLogger(__name__)

_SCHEDULES = list(ScheduleKind)
_OPTIMIZERS = list(OptimizerKind)


@dataclass(frozen=True, slots=True)
class HyperParams:
    lr: float
    schedule: ScheduleKind
    optimizer: OptimizerKind
    weight_decay: float

    def __post_init__(self) -> None:
        if not LR_MIN <= self.lr <= LR_MAX or not 0 <= self.weight_decay <= WEIGHT_DECAY_MAX:
            msg = f"Hyperparameters outside the search space: lr={self.lr}, weight_decay={self.weight_decay}"
            raise InvalidConfig(msg)

    def optimizer_spec(self, base: OptimizerSpec | None = None) -> OptimizerSpec:
        return replace(base or OptimizerSpec(), kind=self.optimizer, lr=self.lr, weight_decay=self.weight_decay)

    def schedule_spec(self, base: ScheduleSpec | None = None) -> ScheduleSpec:
        return replace(base or ScheduleSpec(), kind=self.schedule)

    def to_dict(self) -> dict[str, Any]:
        return {
            "lr": self.lr,
            "schedule": self.schedule.value,
            "optimizer": self.optimizer.value,
            "weight_decay": self.weight_decay,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> HyperParams:
        return cls(
            lr=float(data["lr"]),
            schedule=ScheduleKind(data["schedule"]),
            optimizer=OptimizerKind(data["optimizer"]),
            weight_decay=float(data["weight_decay"]),
        )


def sample_hyperparams(rng: np.random.Generator) -> HyperParams:
    """lr log-uniform on [LR_MIN, LR_MAX]; schedule and optimizer uniform; weight decay uniform on [0, 0.1]."""
    lr = float(10 ** rng.uniform(math.log10(LR_MIN), math.log10(LR_MAX)))
    schedule = _SCHEDULES[int(rng.integers(len(_SCHEDULES)))]
    optimizer = _OPTIMIZERS[int(rng.integers(len(_OPTIMIZERS)))]
    weight_decay = float(rng.uniform(0.0, WEIGHT_DECAY_MAX))
    return HyperParams(min(max(lr, LR_MIN), LR_MAX), schedule, optimizer, weight_decay)


@dataclass(frozen=True, slots=True)
class SearchContext:
    """Everything a search, cross-validation or final training run shares besides the hyperparameters."""

    model: ModelConfig
    training: TrainingConfig = field(default_factory=TrainingConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    optimizer: OptimizerSpec = field(default_factory=OptimizerSpec)
    schedule: ScheduleSpec = field(default_factory=ScheduleSpec)
    val_fraction: float = 0.2
    overfit_gap: float = OVERFIT_GAP
    jobs: int = 1

    def __post_init__(self) -> None:
        if not 0 < self.val_fraction < 1:
            msg = f"val_fraction must be in (0, 1), got {self.val_fraction}"
            raise InvalidConfig(msg)

    def for_arch(self, arch: Arch) -> SearchContext:
        dilations = self.model.dilations if arch == Arch.DILATED_RESNET else (1,) * len(self.model.dilations)
        return replace(self, model=replace(self.model, arch=arch, dilations=dilations))


def fit(
    params: HyperParams,
    ctx: SearchContext,
    train_set: ImageSet,
    val_set: ImageSet,
    seed: int,
    standardizer: Standardizer | None = None,
) -> TrainResult:
    """Build a fresh model for ctx.model and train it with params; seeds derive from seed."""
    model = build_model(ctx.model, derive_seed(seed, "init"))
    return train(
        model,
        train_set,
        val_set,
        params.optimizer_spec(ctx.optimizer),
        params.schedule_spec(ctx.schedule),
        derive_seed(seed, "run"),
        ctx.training,
        ctx.augment,
        standardizer,
    )


def validation_split(
    phantom_labels: Mapping[PhantomId, int], fraction: float, seed: int
) -> tuple[list[PhantomId], list[PhantomId]]:
    """
    Per class, shuffle the tumors and hold out round(fraction * n) of them (at least one,
    and never all) for validation.

    Raises:
        InsufficientPhantoms: a class has fewer than 2 tumors
    """
    rng = np.random.default_rng(seed)
    train_ids: list[PhantomId] = []
    val_ids: list[PhantomId] = []
    for label in sorted(set(phantom_labels.values())):
        members = sorted(owner for owner, owner_label in phantom_labels.items() if owner_label == label)
        if len(members) < 2:
            msg = f"Class {label} has {len(members)} training tumors, a validation split needs 2"
            raise InsufficientPhantoms(msg)
        held_out = min(max(1, round(fraction * len(members))), len(members) - 1)
        order = rng.permutation(len(members))
        val_ids.extend(members[i] for i in order[:held_out])
        train_ids.extend(members[i] for i in order[held_out:])
    return sorted(train_ids), sorted(val_ids)


@dataclass(frozen=True, slots=True)
class SearchRun:
    index: int
    params: HyperParams
    train_acc: float
    val_acc: float
    val_loss: float
    stop_epoch: int
    best_epoch: int
    error: str | None = None

    @property
    def overfit_gap(self) -> float:
        return self.train_acc - self.val_acc

    def to_dict(self) -> dict[str, Any]:
        return {
            "index": self.index,
            **self.params.to_dict(),
            "train_acc": self.train_acc,
            "val_acc": self.val_acc,
            "val_loss": self.val_loss if math.isfinite(self.val_loss) else None,
            "overfit_gap": self.overfit_gap,
            "stop_epoch": self.stop_epoch,
            "best_epoch": self.best_epoch,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> SearchRun:
        def number(key: str, missing: float = math.nan) -> float:
            value = data.get(key)
            return missing if value is None else float(value)

        return cls(
            index=int(data["index"]),
            params=HyperParams.from_dict(data),
            train_acc=number("train_acc"),
            val_acc=number("val_acc"),
            val_loss=number("val_loss", math.inf),
            stop_epoch=int(data["stop_epoch"]),
            best_epoch=int(data["best_epoch"]),
            error=data.get("error"),
        )


def select_config(runs: Sequence[SearchRun], overfit_gap: float = OVERFIT_GAP) -> tuple[int, dict[str, Any]]:
    """
    Pure selection over a recorded run table; returns the chosen run index and why.
    """
    if not runs:
        msg = "Cannot select from an empty search"
        raise InvalidConfig(msg)
    survivors = [run for run in runs if run.overfit_gap <= overfit_gap]
    gap_filter_applied = bool(survivors)
    if not survivors:
        survivors = list(runs)
    best_loss = min(run.val_loss for run in survivors)
    tied = [run for run in survivors if run.val_loss <= best_loss + IMPROVEMENT_EPSILON]

    def tie_key(run: SearchRun) -> tuple[float, int]:
        return (run.overfit_gap if math.isfinite(run.overfit_gap) else math.inf, run.index)

    chosen = min(tied, key=tie_key)
    rationale = {
        "overfit_gap_threshold": overfit_gap,
        "gap_filter_applied": gap_filter_applied,
        "filtered_out": sorted(run.index for run in runs if run not in survivors),
        "best_val_loss": chosen.val_loss if math.isfinite(chosen.val_loss) else None,
        "tied_candidates": sorted(run.index for run in tied),
    }
    return chosen.index, rationale


@dataclass(slots=True)
class SearchResult:
    arch: Arch
    runs: list[SearchRun]
    selected: int
    rationale: dict[str, Any]
    validation_phantoms: list[PhantomId] = field(default_factory=list)
    seed: int = 0

    @property
    def best(self) -> SearchRun:
        return next(run for run in self.runs if run.index == self.selected)

    def table(self) -> pd.DataFrame:
        frame = pd.DataFrame([run.to_dict() for run in self.runs])
        frame["selected"] = frame["index"] == self.selected
        return frame

    def to_dict(self) -> dict[str, Any]:
        return {
            "arch": self.arch.value,
            "seed": self.seed,
            "selected": self.selected,
            "selected_params": self.best.params.to_dict(),
            "rationale": self.rationale,
            "validation_phantoms": self.validation_phantoms,
            "runs": [run.to_dict() for run in self.runs],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> SearchResult:
        return cls(
            arch=Arch(data["arch"]),
            runs=[SearchRun.from_dict(run) for run in data["runs"]],
            selected=int(data["selected"]),
            rationale=dict(data.get("rationale", {})),
            validation_phantoms=[PhantomId(owner) for owner in data.get("validation_phantoms", [])],
            seed=int(data.get("seed", 0)),
        )

    def write(self, directory: Path, config_echo: Mapping[str, Any] | None = None) -> None:
        write_json(directory / SEARCH_FILE, {**self.to_dict(), "config": dict(config_echo or {})})
        self.table().to_csv(directory / RESULTS_TABLE_FILE, index=False)
        plot_search_sweep(self.table(), directory / SWEEP_PLOT_FILE)

    @classmethod
    def load(cls, directory: Path) -> SearchResult:
        return cls.from_dict(read_json(directory / SEARCH_FILE))


def _run_config(
    index: int,
    params: HyperParams,
    ctx: SearchContext,
    train_set: ImageSet,
    val_set: ImageSet,
    standardizer: Standardizer,
    seed: int,
) -> SearchRun:
    try:
        result = fit(params, ctx, train_set, val_set, derive_seed(seed, "config", index), standardizer)
    except AgcSimException as err:
        logger.warning("Search config %d (%s) failed: %s", index, params.to_dict(), err)
        return SearchRun(index, params, math.nan, math.nan, math.inf, 0, -1, str(err))
    train_inputs = standardizer(train_set.images, dtype=result.model.dtype)
    _, train_acc = evaluate_loss(result.model, train_inputs, train_set.labels, ctx.training.batch_size)
    best = result.state.history[result.state.best_epoch] if result.state.best_epoch >= 0 else None
    run = SearchRun(
        index=index,
        params=params,
        train_acc=train_acc,
        val_acc=best.val_acc if best else math.nan,
        val_loss=result.state.best_val_loss,
        stop_epoch=len(result.state.history),
        best_epoch=result.state.best_epoch,
    )
    logger.info(
        "Search config %d: %s -> val loss %.4f, gap %.3f",
        index,
        params.to_dict(),
        run.val_loss,
        run.overfit_gap,
    )
    return run


def run_random_search(
    arch: Arch,
    dataset: ImageSet,
    n_configs: int,
    seed: int,
    ctx: SearchContext,
) -> SearchResult:
    """
    Sample n_configs hyperparameter sets and train each on one fixed tumor-level split of
    dataset (the training split). Failed runs are kept with infinite validation loss.
    """
    if n_configs < 1:
        msg = f"n_configs must be at least 1, got {n_configs}"
        raise InvalidConfig(msg)
    ctx = ctx.for_arch(arch)
    train_ids, val_ids = validation_split(
        dataset.phantom_labels(), ctx.val_fraction, derive_seed(seed, "validation-split")
    )
    train_set = dataset.for_phantoms(train_ids)
    val_set = dataset.for_phantoms(val_ids)
    standardizer = Standardizer.fit(train_set.images)
    rng = np.random.default_rng(derive_seed(seed, "hyperparams"))
    configs = [sample_hyperparams(rng) for _ in range(n_configs)]
    logger.info(
        "Searching %d configs for %s on %d train / %d validation images",
        n_configs,
        arch.value,
        len(train_set),
        len(val_set),
    )
    with ThreadPoolExecutor(max_workers=max(1, ctx.jobs)) as executor:
        runs = list(
            executor.map(
                lambda item: _run_config(item[0], item[1], ctx, train_set, val_set, standardizer, seed),
                enumerate(configs),
            )
        )
    selected, rationale = select_config(runs, ctx.overfit_gap)
    logger.info("Selected config %d for %s: %s", selected, arch.value, configs[selected].to_dict())
    return SearchResult(arch, runs, selected, rationale, val_ids, seed)
