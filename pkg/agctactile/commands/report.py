"""Cross-architecture comparison stage."""

from __future__ import annotations

import logging

from agctactile.commands.common import EVALUATE_DIR, REPORT_DIR, PipelineCommandBase
from agctactile.constants import REPORT_FILE
from agctactile.errors import MissingStageOutput
from agctactile.experiment.report import Comparison, build_comparison

logger = logging.getLogger(__name__)


class ReportCommand(PipelineCommandBase):
    """Add the report stage: every evaluated architecture side by side with the published figures."""

    def report_command(self) -> Comparison:
        evaluate_dir = self.output_dir / EVALUATE_DIR
        if not any(evaluate_dir.glob(f"*/{REPORT_FILE}")):
            msg = f"No evaluation reports under {evaluate_dir}"
            raise MissingStageOutput(msg, "run the 'evaluate' stage first")
        comparison = build_comparison(evaluate_dir, self.stage_dir(REPORT_DIR))
        logger.info("Compared %d architectures", len(comparison.table))
        return comparison
