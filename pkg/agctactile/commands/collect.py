"""Dataset collection and tumor-level splitting stages."""

from __future__ import annotations

from collections import Counter
import logging

from agctactile.collection import DatasetManifest, collect_dataset, split_train_test
from agctactile.commands.phantoms import PhantomsCommand
from agctactile.commands.common import DATASET_DIR
from agctactile.types import Split

logger = logging.getLogger(__name__)


class CollectCommand(PhantomsCommand):
    """
    Add the collect and split stages.

    collect needs the phantom bank; split rewrites the manifest in place with each
    image's split.
    """

    def collect_command(self) -> DatasetManifest:
        bank = self.load_phantom_bank()
        return collect_dataset(
            bank,
            self.config.collection,
            self.config.sensor,
            self.config.master_seed,
            self.stage_dir(DATASET_DIR),
            self.config.jobs,
            self.config_echo(),
        )

    def split_command(self) -> DatasetManifest:
        manifest = self.load_manifest()
        manifest = split_train_test(
            manifest,
            self.seed_for("split"),
            self.config.collection.train_per_class,
            self.config.collection.test_per_class,
        )
        manifest.config = self.config_echo()
        manifest.save()
        images = Counter(entry.split for entry in manifest.entries)
        logger.info(
            "Dataset split: %d train images (%d tumors), %d test images (%d tumors)",
            images[Split.TRAIN],
            len(manifest.phantom_ids(Split.TRAIN)),
            images[Split.TEST],
            len(manifest.phantom_ids(Split.TEST)),
        )
        return manifest
