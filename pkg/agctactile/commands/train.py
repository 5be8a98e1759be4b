"""
Final training and held-out evaluation stages.

train fits the selected configuration on the training tumors, keeping a tumor-level
validation share for early stopping, and writes the checkpoint with its
standardization statistics. evaluate scores that checkpoint on the test tumors.
"""

from __future__ import annotations

from pathlib import Path
import logging

from agctactile.augment import Standardizer
from agctactile.commands.common import EVALUATE_DIR, TRAIN_DIR, PipelineCommandBase
from agctactile.constants import CHECKPOINT_FILE, RUN_RECORD_FILE
from agctactile.experiment import MetricsReport, evaluate_final, validation_split
from agctactile.experiment.search import fit
from agctactile.nn import save_checkpoint
from agctactile.optim import TrainResult
from agctactile.types import Arch, Split
from agctactile.utils import write_json

logger = logging.getLogger(__name__)


class TrainCommand(PipelineCommandBase):
    """Add the train and evaluate stages."""

    def train_command(self, arch: Arch | None = None) -> TrainResult:
        arch = self.arch_or_default(arch)
        params, source = self.selected_hyperparams(arch)
        ctx = self.search_context(arch)
        images = self.load_images(Split.TRAIN)
        train_ids, val_ids = validation_split(
            images.phantom_labels(), ctx.val_fraction, self.seed_for("train-validation", arch.value)
        )
        train_set = images.for_phantoms(train_ids)
        val_set = images.for_phantoms(val_ids)
        logger.info(
            "Training %s with the %s configuration %s on %d images, validating on %d",
            arch.value,
            source,
            params.to_dict(),
            len(train_set),
            len(val_set),
        )
        result = fit(
            params, ctx, train_set, val_set, self.seed_for("train", arch.value), Standardizer.fit(train_set.images)
        )

        directory = self.stage_dir(TRAIN_DIR, arch.value)
        save_checkpoint(
            directory / CHECKPOINT_FILE,
            result.model,
            result.state.best_epoch,
            result.standardizer,
            extra={
                "hyperparams": params.to_dict(),
                "hyperparams_source": source,
                "stop_reason": result.state.stop_reason,
            },
        )
        write_json(
            directory / RUN_RECORD_FILE,
            {
                **result.record(),
                "hyperparams": params.to_dict(),
                "hyperparams_source": source,
                "validation_phantoms": val_ids,
                "config": self.config_echo(),
            },
        )
        logger.info("Wrote %s checkpoint from epoch %d to %s", arch.value, result.state.best_epoch, directory)
        return result

    def evaluate_command(self, arch: Arch | None = None) -> MetricsReport:
        arch = self.arch_or_default(arch)
        return evaluate_final(
            self._evaluate_checkpoint_path(arch),
            self.load_images(Split.TEST),
            self.stage_dir(EVALUATE_DIR, arch.value),
            self.config_echo(),
        )

    def _evaluate_checkpoint_path(self, arch: Arch) -> Path:
        if self.config.evaluate.checkpoint is not None:
            return self.config.evaluate.checkpoint
        return self.require(self.output_dir / TRAIN_DIR / arch.value / CHECKPOINT_FILE, "train")
