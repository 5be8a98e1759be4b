"""
Tumor-level stratified k-fold cross-validation.

Folds partition the training tumors, not their images, so no tumor contributes images to
both sides of any fold. Per class, tumors are shuffled with the seed and dealt over the
folds, which keeps each fold's class counts within one of each other.
"""

from __future__ import annotations

from typing import Any, Mapping
from dataclasses import dataclass, field
from pathlib import Path
import logging

from sklearn.model_selection import StratifiedKFold
import numpy as np
import pandas as pd

from agctactile.constants import KFOLD_CURVES_FILE, KFOLD_FILE
from agctactile.dataset import ImageSet
from agctactile.errors import InsufficientPhantoms, InvalidConfig
from agctactile.experiment.plots import plot_kfold_curves
from agctactile.experiment.search import HyperParams, SearchContext, fit
from agctactile.optim import EpochRecord
from agctactile.primitives import PhantomId
from agctactile.types import Arch
from agctactile.utils import derive_seed, write_json

logger = logging.getLogger(__name__)


def stratified_kfold(phantom_labels: Mapping[PhantomId, int], k: int, seed: int) -> list[list[PhantomId]]:
    """
    Split tumors into k disjoint folds that together cover every tumor.

    Raises:
        InsufficientPhantoms: some class has fewer than k tumors
    """
    if k < 2:
        msg = f"Cross-validation needs at least 2 folds, got {k}"
        raise InvalidConfig(msg)
    owners = sorted(phantom_labels)
    labels = np.array([phantom_labels[owner] for owner in owners])
    for label, count in zip(*np.unique(labels, return_counts=True)):
        if count < k:
            msg = f"Class {label} has {count} tumors, {k}-fold cross-validation needs {k}"
            raise InsufficientPhantoms(msg)
    splitter = StratifiedKFold(n_splits=k, shuffle=True, random_state=seed % 2**32)
    return [
        sorted(owners[i] for i in held_out) for _, held_out in splitter.split(np.zeros(len(owners)), labels)
    ]


@dataclass(frozen=True, slots=True)
class FoldResult:
    fold: int
    validation_phantoms: list[PhantomId]
    history: list[EpochRecord]
    best_epoch: int
    val_acc: float
    val_loss: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "fold": self.fold,
            "validation_phantoms": self.validation_phantoms,
            "best_epoch": self.best_epoch,
            "val_acc": self.val_acc,
            "val_loss": self.val_loss,
            "history": [
                {"epoch": r.epoch, "train_acc": r.train_acc, "val_acc": r.val_acc, "val_loss": r.val_loss, "lr": r.lr}
                for r in self.history
            ],
        }


@dataclass(slots=True)
class CrossValidationResult:
    arch: Arch
    params: HyperParams
    folds: list[FoldResult] = field(default_factory=list)

    @property
    def fold_accuracies(self) -> list[float]:
        return [fold.val_acc for fold in self.folds]

    def curves(self) -> pd.DataFrame:
        """
        Per-epoch mean and standard deviation of train and validation accuracy over the folds.

        A fold that stopped early keeps contributing its last recorded values, since its
        weights no longer change; folds_active counts the folds still training.
        """
        longest = max((len(fold.history) for fold in self.folds), default=0)
        rows = []
        for epoch in range(longest):
            train_acc = [fold.history[min(epoch, len(fold.history) - 1)].train_acc for fold in self.folds]
            val_acc = [fold.history[min(epoch, len(fold.history) - 1)].val_acc for fold in self.folds]
            rows.append(
                {
                    "epoch": epoch,
                    "train_acc_mean": float(np.mean(train_acc)),
                    "train_acc_std": float(np.std(train_acc)),
                    "val_acc_mean": float(np.mean(val_acc)),
                    "val_acc_std": float(np.std(val_acc)),
                    "folds_active": sum(len(fold.history) > epoch for fold in self.folds),
                }
            )
        return pd.DataFrame(
            rows,
            columns=["epoch", "train_acc_mean", "train_acc_std", "val_acc_mean", "val_acc_std", "folds_active"],
        )

    def to_dict(self) -> dict[str, Any]:
        accuracies = self.fold_accuracies
        return {
            "arch": self.arch.value,
            "params": self.params.to_dict(),
            "fold_accuracies": accuracies,
            "mean_accuracy": float(np.mean(accuracies)) if accuracies else None,
            "std_accuracy": float(np.std(accuracies)) if accuracies else None,
            "folds": [fold.to_dict() for fold in self.folds],
        }

    def write(self, directory: Path, config_echo: Mapping[str, Any] | None = None) -> None:
        write_json(directory / KFOLD_FILE, {**self.to_dict(), "config": dict(config_echo or {})})
        curves = self.curves()
        curves.to_csv(directory / KFOLD_CURVES_FILE, index=False)
        plot_kfold_curves(curves, (directory / KFOLD_CURVES_FILE).with_suffix(".svg"))


def run_cross_validation(
    arch: Arch,
    dataset: ImageSet,
    params: HyperParams,
    k: int,
    seed: int,
    ctx: SearchContext,
) -> CrossValidationResult:
    """Train one model per fold with params, validating on the held-out tumors."""
    ctx = ctx.for_arch(arch)
    folds = stratified_kfold(dataset.phantom_labels(), k, derive_seed(seed, "folds"))
    result = CrossValidationResult(arch, params)
    for index, held_out in enumerate(folds):
        held = set(held_out)
        train_set = dataset.for_phantoms([owner for owner in dataset.unique_phantoms() if owner not in held])
        val_set = dataset.for_phantoms(held_out)
        trained = fit(params, ctx, train_set, val_set, derive_seed(seed, "fold", index))
        state = trained.state
        best = state.history[state.best_epoch] if state.best_epoch >= 0 else None
        result.folds.append(
            FoldResult(
                fold=index,
                validation_phantoms=held_out,
                history=list(state.history),
                best_epoch=state.best_epoch,
                val_acc=best.val_acc if best else float("nan"),
                val_loss=state.best_val_loss,
            )
        )
        logger.info(
            "Fold %d/%d for %s: val accuracy %.3f after %d epochs",
            index + 1,
            k,
            arch.value,
            result.folds[-1].val_acc,
            len(state.history),
        )
    return result
