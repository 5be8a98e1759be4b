"""
Workcell calibration stage.

Replays the calibration procedure on a synthetic workcell: planar camera calibration,
per-pose target poses, then the hand-eye solve. The registration report and every
correspondence set are written so the solve can be replayed from the files alone.
"""

from __future__ import annotations

import logging

from agctactile.commands.common import CALIBRATION_DIR, PipelineCommandBase
from agctactile.constants import REGISTRATION_FILE
from agctactile.utils import write_json
from agctactile.workcell import CalibrationOutcome, calibrate

logger = logging.getLogger(__name__)

CORRESPONDENCE_SUBDIR = "correspondences"


class CalibrateCommand(PipelineCommandBase):
    """Add the calibrate stage."""

    def calibrate_command(self) -> CalibrationOutcome:
        outcome = calibrate(self.config.calibration, self.seed_for("calibration"))
        directory = self.stage_dir(CALIBRATION_DIR)
        write_json(directory / REGISTRATION_FILE, {**outcome.to_dict(), "config": self.config_echo()})
        for index, view in enumerate(outcome.views):
            write_json(directory / CORRESPONDENCE_SUBDIR / f"view_{index:02}.json", view.to_json())
        logger.info(
            "Calibrated workcell from %d poses: rotation error %.3g rad, translation error %.3g mm",
            len(outcome.views),
            self._calibrate_worst(outcome, "_rot"),
            self._calibrate_worst(outcome, "_trans"),
        )
        return outcome

    @staticmethod
    def _calibrate_worst(outcome: CalibrationOutcome, suffix: str) -> float:
        return max((value for key, value in outcome.errors.items() if key.endswith(suffix)), default=0.0)
