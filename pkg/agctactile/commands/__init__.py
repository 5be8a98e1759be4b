"""
Provide the pipeline stage commands.

Each stage is a mixin class inheriting from the base command class in `common.py`,
which holds the resolved run configuration and the shared file layout. The runner in
`agctactile.cli` composes them:

    class Pipeline(CollectCommand, CalibrateCommand, SearchCommand, TrainCommand, ReportCommand):
        ...

Command Implementation Guidelines:
- Each mixin inherits from PipelineCommandBase
- Public stage methods end in `_command` and carry the stage name, for example
  `gen_phantoms_command` or `cv_command`
- Private helpers use the stage name as prefix, for example `_calibrate_worst`,
  so mixins never collide once composed
- Stages read earlier stages' outputs only through files under output_dir
"""

from .calibrate import CalibrateCommand
from .collect import CollectCommand
from .common import PipelineCommandBase
from .phantoms import PhantomsCommand
from .report import ReportCommand
from .search import SearchCommand
from .train import TrainCommand

__all__ = [
    "CalibrateCommand",
    "CollectCommand",
    "PhantomsCommand",
    "PipelineCommandBase",
    "ReportCommand",
    "SearchCommand",
    "TrainCommand",
]
