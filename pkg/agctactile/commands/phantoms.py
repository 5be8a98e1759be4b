"""Phantom bank generation stage."""

from __future__ import annotations

from pathlib import Path
import logging

from agctactile.commands.common import PHANTOMS_DIR, PipelineCommandBase
from agctactile.phantom import PhantomSpec, build_phantom_bank, load_bank, save_bank

logger = logging.getLogger(__name__)

BANK_SUBDIR = "bank"


class PhantomsCommand(PipelineCommandBase):
    """Generate the synthetic tumor phantoms and write them under <output_dir>/phantoms/bank."""

    def gen_phantoms_command(self) -> list[Path]:
        bank = build_phantom_bank(self.config.master_seed, self.config.phantom, self.config.jobs)
        directory = self.stage_dir(PHANTOMS_DIR) / BANK_SUBDIR
        directory.mkdir(parents=True, exist_ok=True)
        paths = save_bank(bank, directory)
        logger.info("Wrote %d phantoms to %s", len(paths), directory)
        return paths

    def load_phantom_bank(self) -> list[PhantomSpec]:
        return load_bank(self.require(self.output_dir / PHANTOMS_DIR / BANK_SUBDIR, "gen-phantoms"))
