"""
Hyperparameter search and cross-validation stages.

Both work on the training split only; the test tumors are never seen before the
evaluate stage.
"""

from __future__ import annotations

import logging

from agctactile.commands.common import CV_DIR, SEARCH_DIR, PipelineCommandBase
from agctactile.experiment import CrossValidationResult, SearchResult, run_cross_validation, run_random_search
from agctactile.types import Arch, Split

logger = logging.getLogger(__name__)


class SearchCommand(PipelineCommandBase):
    """Add the search and cv stages."""

    def search_command(self, arch: Arch | None = None) -> SearchResult:
        arch = self.arch_or_default(arch)
        result = run_random_search(
            arch,
            self.load_images(Split.TRAIN),
            self.config.search.n_configs,
            self.seed_for("search", arch.value),
            self.search_context(arch),
        )
        result.write(self.stage_dir(SEARCH_DIR, arch.value), self.config_echo())
        return result

    def cv_command(self, arch: Arch | None = None) -> CrossValidationResult:
        arch = self.arch_or_default(arch)
        params, source = self.selected_hyperparams(arch)
        logger.info("Cross-validating %s with the %s configuration %s", arch.value, source, params.to_dict())
        result = run_cross_validation(
            arch,
            self.load_images(Split.TRAIN),
            params,
            self.config.cv.folds,
            self.seed_for("cv", arch.value),
            self.search_context(arch),
        )
        result.write(self.stage_dir(CV_DIR, arch.value), self.config_echo())
        return result
