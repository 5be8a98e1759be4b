"""
Common base class for the pipeline stage commands.

The base holds the resolved run configuration and the file plumbing every stage shares:
where each stage writes, how a stage finds what an earlier stage wrote, and which
sub-seed a stage draws from. Stages communicate only through these files.
"""

from __future__ import annotations

from typing import Any
from pathlib import Path
import logging

from agctactile.collection import DatasetManifest
from agctactile.config import RunConfig
from agctactile.constants import MANIFEST_FILE, RESOLVED_CONFIG_FILE, SEARCH_FILE
from agctactile.dataset import ImageSet, load_split
from agctactile.errors import MissingStageOutput
from agctactile.experiment import HyperParams, SearchContext, SearchResult, reference_hyperparams
from agctactile.types import Arch, Split
from agctactile.utils import derive_seed, write_json

logger = logging.getLogger(__name__)

PHANTOMS_DIR = "phantoms"
CALIBRATION_DIR = "calibration"
DATASET_DIR = "dataset"
SEARCH_DIR = "search"
CV_DIR = "cv"
TRAIN_DIR = "train"
EVALUATE_DIR = "evaluate"
REPORT_DIR = "report"


class PipelineCommandBase:
    """
    Base class for all stage commands.

    Provides shared configuration and file layout for the command mixins.
    """

    config: RunConfig

    def __init__(self, config: RunConfig) -> None:
        self.config = config

    @property
    def output_dir(self) -> Path:
        return self.config.output_dir

    def config_echo(self) -> dict[str, Any]:
        return self.config.to_dict()

    def seed_for(self, *labels: str | int) -> int:
        return derive_seed(self.config.master_seed, *labels)

    def arch_or_default(self, arch: Arch | None) -> Arch:
        return arch or self.config.model.arch

    def stage_dir(self, *parts: str) -> Path:
        """Create a stage's output directory and leave the resolved config next to its outputs."""
        directory = self.output_dir.joinpath(*parts)
        directory.mkdir(parents=True, exist_ok=True)
        write_json(directory / RESOLVED_CONFIG_FILE, self.config_echo())
        return directory

    def require(self, path: Path, producer: str) -> Path:
        """
        Raises:
            MissingStageOutput: path does not exist yet
        """
        if not path.exists():
            msg = f"{path} not found"
            raise MissingStageOutput(msg, f"run the '{producer}' stage first")
        return path

    def load_manifest(self, require_split: bool = False) -> DatasetManifest:
        manifest = DatasetManifest.load(self.require(self.output_dir / DATASET_DIR / MANIFEST_FILE, "collect"))
        if require_split and manifest.split_seed is None:
            msg = f"The dataset under {manifest.root} has not been split"
            raise MissingStageOutput(msg, "run the 'split' stage first")
        return manifest

    def load_images(self, split: Split) -> ImageSet:
        manifest = self.load_manifest(require_split=True)
        images = load_split(manifest, split, self.config.augment.target_size, self.config.jobs)
        logger.info("Loaded %d %s images from %s", len(images), split.value, manifest.root)
        return images

    def search_context(self, arch: Arch) -> SearchContext:
        return SearchContext(
            model=self.config.model,
            training=self.config.training,
            augment=self.config.augment,
            optimizer=self.config.optimizer,
            schedule=self.config.schedule,
            val_fraction=self.config.search.val_fraction,
            overfit_gap=self.config.search.overfit_gap,
            jobs=self.config.jobs,
        ).for_arch(arch)

    def selected_hyperparams(self, arch: Arch) -> tuple[HyperParams, str]:
        """The search's selected configuration when a search exists, otherwise the reference one."""
        search_dir = self.output_dir / SEARCH_DIR / arch.value
        if (search_dir / SEARCH_FILE).is_file():
            result = SearchResult.load(search_dir)
            return result.best.params, "search"
        logger.info("No search results for %s, using the reference configuration", arch.value)
        return reference_hyperparams(arch), "reference"
