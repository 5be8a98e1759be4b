"""
Command line entry point.

    agctactile <stage> [--config FILE] [--seed N] [--out DIR] [--n-configs N]
                       [--resolution N|HxW] [--views N] [--arch ARCH] [--jobs N] [-v]

Stages: gen-phantoms, calibrate, collect, split, search, cv, train, evaluate, report,
and all (gen-phantoms, collect, split, search, cv, train, evaluate in order).

Exit status is 0 on success, 1 for usage errors (unknown stage, bad flag, unreadable
config file, no arguments) and 2 when a stage fails.
"""

from __future__ import annotations

from typing import Any, Callable, Final, NoReturn, Sequence
from pathlib import Path
import argparse
import logging
import logging.config
import platform
import sys

from agctactile import __version__
from agctactile.commands import CalibrateCommand, CollectCommand, ReportCommand, SearchCommand, TrainCommand
from agctactile.config import RunConfig, resolve_config
from agctactile.constants import RESOLVED_CONFIG_FILE
from agctactile.errors import AgcSimException, BadFlag, UnknownSubcommand, UsageError
from agctactile.types import Arch
from agctactile.utils import write_json

logger = logging.getLogger(__name__)

PROG: Final[str] = "agctactile"

ALL_STAGES: Final[tuple[str, ...]] = ("gen-phantoms", "collect", "split", "search", "cv", "train", "evaluate")

STAGE_HELP: Final[dict[str, str]] = {
    "gen-phantoms": "generate the tumor phantom bank",
    "calibrate": "replay hand-eye and camera calibration on a synthetic workcell",
    "collect": "capture tactile images of every phantom",
    "split": "assign tumors to the train and test splits",
    "search": "random hyperparameter search on the training tumors",
    "cv": "k-fold cross-validation of the selected configuration",
    "train": "train the final model",
    "evaluate": "score the trained model on the test tumors",
    "report": "compare every evaluated architecture",
    "all": "run " + ", ".join(ALL_STAGES) + " in order",
}


class Pipeline(CollectCommand, CalibrateCommand, SearchCommand, TrainCommand, ReportCommand):
    """Every stage command, composed."""

    def run_stage(self, stage: str, arch: Arch | None = None) -> Any:
        stages: dict[str, Callable[[], Any]] = {
            "gen-phantoms": self.gen_phantoms_command,
            "calibrate": self.calibrate_command,
            "collect": self.collect_command,
            "split": self.split_command,
            "search": lambda: self.search_command(arch),
            "cv": lambda: self.cv_command(arch),
            "train": lambda: self.train_command(arch),
            "evaluate": lambda: self.evaluate_command(arch),
            "report": self.report_command,
            "all": lambda: self.all_command(arch),
        }
        if stage not in stages:
            msg = f"Unknown stage '{stage}'"
            raise UnknownSubcommand(msg, f"choose one of {', '.join(stages)}")
        logger.info("Running stage %s", stage)
        return stages[stage]()

    def all_command(self, arch: Arch | None = None) -> Any:
        result = None
        for stage in ALL_STAGES:
            result = self.run_stage(stage, arch)
        return result


class PipelineArgumentParser(argparse.ArgumentParser):
    """ArgumentParser that raises instead of exiting, so dispatch owns the exit status."""

    def error(self, message: str) -> NoReturn:
        raise BadFlag(message, self.format_usage().strip())


def _positive_int(value: str) -> int:
    number = int(value)
    if number < 1:
        msg = f"expected a positive integer, got {value}"
        raise argparse.ArgumentTypeError(msg)
    return number


def _resolution(value: str) -> list[int]:
    """'64' for a square image, or 'HxW'."""
    parts = value.lower().split("x")
    if len(parts) > 2:
        msg = f"expected N or HxW, got {value}"
        raise argparse.ArgumentTypeError(msg)
    sizes = [_positive_int(part) for part in parts]
    return sizes * 2 if len(sizes) == 1 else sizes


def build_parser() -> PipelineArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML or JSON file merged over the defaults")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--n-configs", type=_positive_int, help="hyperparameter configurations to sample")
    common.add_argument("--resolution", type=_resolution, help="tactile image and network input size, N or HxW")
    common.add_argument("--views", type=_positive_int, help="views collected per phantom")
    common.add_argument("--arch", choices=[arch.value for arch in Arch], help="classifier architecture")
    common.add_argument("--jobs", type=_positive_int, help="worker threads")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")

    parser = PipelineArgumentParser(prog=PROG, description="Simulated tactile sensing pipeline for AGC tumors")
    parser.add_argument("--version", action="store_true", help="print build metadata and exit")
    subparsers = parser.add_subparsers(dest="stage", metavar="stage", parser_class=PipelineArgumentParser)
    for stage, help_text in STAGE_HELP.items():
        subparsers.add_parser(stage, parents=[common], help=help_text, description=help_text)
    return parser


def overrides_from(args: argparse.Namespace) -> dict[str, Any]:
    """Dotted config keys for every flag that was given."""
    overrides: dict[str, Any] = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.out is not None:
        overrides["output_dir"] = str(args.out)
    if args.n_configs is not None:
        overrides["search.n_configs"] = args.n_configs
    if args.resolution is not None:
        overrides["sensor.resolution"] = list(args.resolution)
        overrides["augment.target_size"] = list(args.resolution)
    if args.views is not None:
        overrides["collection.views_per_phantom"] = args.views
    if args.arch is not None:
        overrides["model.arch"] = args.arch
    if args.jobs is not None:
        overrides["jobs"] = args.jobs
    return overrides


def version_text() -> str:
    return f"{PROG} {__version__} (Python {platform.python_version()}, {platform.system()} {platform.machine()})"


def configure_logging(config: RunConfig, verbose: bool = False) -> None:
    logging.config.dictConfig(config.logging)
    if verbose:
        logging.getLogger().setLevel(logging.DEBUG)


def _report(err: BaseException) -> None:
    sys.stderr.write(f"{PROG}: error: {err}\n")


def dispatch(argv: Sequence[str]) -> int:
    """
    Run one stage as described by argv.

    Returns:
        0 on success, 1 on a usage error, 2 when the stage fails
    """
    parser = build_parser()
    if not argv:
        sys.stderr.write(parser.format_usage())
        return 1
    if argv[0] not in STAGE_HELP and not argv[0].startswith("-"):
        msg = f"Unknown stage '{argv[0]}'"
        _report(UnknownSubcommand(msg, f"choose one of {', '.join(STAGE_HELP)}"))
        return 1

    try:
        args = parser.parse_args(list(argv))
        if args.version:
            sys.stdout.write(version_text() + "\n")
            return 0
        if args.stage is None:
            sys.stderr.write(parser.format_usage())
            return 1
        config = resolve_config(args.config, overrides_from(args))
    except SystemExit as err:
        # -h/--help prints and exits through argparse
        return int(err.code or 0)
    except UsageError as err:
        _report(err)
        return 1
    except AgcSimException as err:
        _report(err)
        return 2

    configure_logging(config, args.verbose)
    try:
        config.output_dir.mkdir(parents=True, exist_ok=True)
        write_json(config.output_dir / RESOLVED_CONFIG_FILE, config.to_dict())
        result = Pipeline(config).run_stage(args.stage)
    except (AgcSimException, OSError) as err:
        logger.debug("Stage %s failed", args.stage, exc_info=True)
        _report(err)
        return 2

    if args.stage == "report":
        sys.stdout.write(result.text + "\n")
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    return dispatch(sys.argv[1:] if argv is None else argv)
