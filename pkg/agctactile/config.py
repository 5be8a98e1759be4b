"""
Run configuration.

The packaged base-config.yaml holds every default. A user file (YAML, so JSON works too)
is merged over it through mautrix's BaseProxyConfig, command-line flags are written over
the result by dotted key, and the merged mapping is validated into RunConfig: one typed,
frozen record per stage.
"""

from __future__ import annotations

from typing import Any, Callable, Iterator, Mapping
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
import logging

from mautrix.util.config import BaseProxyConfig, ConfigUpdateHelper, RecursiveDict
from ruamel.yaml import YAML
from ruamel.yaml.comments import CommentedMap
from ruamel.yaml.error import YAMLError

from agctactile.augment import AugmentConfig
from agctactile.collection import CollectionConfig
from agctactile.errors import ConfigParse, InvalidConfig
from agctactile.nn.models import ModelConfig
from agctactile.optim import OptimizerSpec, ScheduleSpec, TrainingConfig
from agctactile.phantom import PhantomBankConfig
from agctactile.tactile_sim import SensorConfig
from agctactile.utils import canonical_dumps, full_dict_copy
from agctactile.workcell import CalibrationConfig

logger = logging.getLogger(__name__)

BASE_CONFIG_RESOURCE = "base-config.yaml"

# Sections merged as a whole rather than key by key
_OPAQUE_SECTIONS = frozenset({"logging"})


def _yaml() -> YAML:
    return YAML(typ="rt")


def read_base_config() -> CommentedMap:
    text = resources.files("agctactile").joinpath(BASE_CONFIG_RESOURCE).read_text(encoding="utf-8")
    return _yaml().load(text)


def leaf_paths(data: Mapping[str, Any], prefix: str = "") -> Iterator[str]:
    """Dotted paths of every non-mapping value; empty mappings and opaque sections count as leaves."""
    for key, value in data.items():
        path = f"{prefix}{key}"
        if isinstance(value, Mapping) and value and path not in _OPAQUE_SECTIONS:
            yield from leaf_paths(value, f"{path}.")
        else:
            yield path


def to_plain(value: Any) -> Any:
    """CommentedMap/CommentedSeq trees to plain dicts and lists."""
    if isinstance(value, Mapping):
        return {str(key): to_plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(item) for item in value]
    return value


class PipelineConfig(BaseProxyConfig):
    """The merged configuration: base defaults with the user's file copied over them."""

    def do_update(self, helper: ConfigUpdateHelper) -> None:
        for path in leaf_paths(read_base_config()):
            if path in _OPAQUE_SECTIONS:
                helper.copy_dict(path)
            else:
                helper.copy(path)

    def as_dict(self) -> dict[str, Any]:
        return {key: to_plain(self[key]) for key in read_base_config()}


def load_pipeline_config(path: Path | None = None) -> PipelineConfig:
    """
    Raises:
        ConfigParse: the file cannot be read, is not valid YAML/JSON, is not a mapping, or
            has keys the base configuration does not know
    """
    user: CommentedMap = CommentedMap()
    if path is not None:
        try:
            loaded = _yaml().load(path.read_text(encoding="utf-8"))
        except (OSError, YAMLError, UnicodeDecodeError) as err:
            msg = f"Cannot read config file {path}"
            raise ConfigParse(msg, str(err)) from err
        if loaded is not None and not isinstance(loaded, Mapping):
            msg = f"Config file {path} must hold a mapping at the top level"
            raise ConfigParse(msg)
        user = loaded or CommentedMap()
        known = set(leaf_paths(read_base_config()))
        unknown = sorted(
            key for key in leaf_paths(user) if key not in known and not any(key.startswith(f"{k}.") for k in known)
        )
        if unknown:
            msg = f"Unknown config keys in {path}: {', '.join(unknown)}"
            raise ConfigParse(msg)

    def load() -> CommentedMap:
        return user

    def load_base() -> RecursiveDict[CommentedMap]:
        return RecursiveDict(read_base_config(), CommentedMap)

    def save(_data: Any) -> None:
        # the resolved config is written by the CLI as canonical JSON instead
        return None

    config = PipelineConfig(load, load_base, save)
    config.load_and_update()
    return config


@dataclass(frozen=True, slots=True)
class SearchConfig:
    n_configs: int = 10
    val_fraction: float = 0.2
    overfit_gap: float = 0.15

    def __post_init__(self) -> None:
        if self.n_configs < 1 or not 0 < self.val_fraction < 1 or self.overfit_gap < 0:
            msg = f"Invalid search settings {self}"
            raise InvalidConfig(msg)


@dataclass(frozen=True, slots=True)
class CVConfig:
    folds: int = 5

    def __post_init__(self) -> None:
        if self.folds < 2:
            msg = f"Cross-validation needs at least 2 folds, got {self.folds}"
            raise InvalidConfig(msg)


@dataclass(frozen=True, slots=True)
class EvalConfig:
    checkpoint: Path | None = None


def _section(data: Mapping[str, Any], name: str) -> Mapping[str, Any]:
    section = data.get(name)
    if not isinstance(section, Mapping):
        msg = f"Config section '{name}' is missing or not a mapping"
        raise InvalidConfig(msg)
    return section


def _build(name: str, factory: Callable[[], Any]) -> Any:
    try:
        return factory()
    except (KeyError, TypeError, ValueError) as err:
        msg = f"Invalid '{name}' config section"
        raise InvalidConfig(msg, str(err)) from err


@dataclass(frozen=True, slots=True)
class RunConfig:
    """
    Every stage's settings for one run.

    Attributes:
        source: The merged plain mapping the typed records were built from; to_dict()
            returns it, so write -> read -> write is byte-identical
    """

    master_seed: int
    output_dir: Path
    jobs: int
    logging: dict[str, Any]
    phantom: PhantomBankConfig
    sensor: SensorConfig
    collection: CollectionConfig
    calibration: CalibrationConfig
    augment: AugmentConfig
    model: ModelConfig
    optimizer: OptimizerSpec
    schedule: ScheduleSpec
    training: TrainingConfig
    search: SearchConfig
    cv: CVConfig
    evaluate: EvalConfig
    source: dict[str, Any] = field(repr=False, default_factory=dict)

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> RunConfig:
        """
        Raises:
            InvalidConfig: a value is missing, malformed or outside its stage's bounds
        """
        source = full_dict_copy(dict(data))
        collection = _build("collection", lambda: CollectionConfig.from_mapping(_section(source, "collection")))
        augment = _build("augment", lambda: AugmentConfig.from_mapping(_section(source, "augment")))
        search = _section(source, "search")
        checkpoint = _section(source, "evaluate").get("checkpoint")
        try:
            master_seed = int(source["master_seed"])
            jobs = int(source["jobs"])
        except (KeyError, TypeError, ValueError) as err:
            msg = "master_seed and jobs must be integers"
            raise InvalidConfig(msg, str(err)) from err
        if master_seed < 0 or jobs < 1:
            msg = f"master_seed must be non-negative and jobs positive, got {master_seed}, {jobs}"
            raise InvalidConfig(msg)
        return cls(
            master_seed=master_seed,
            output_dir=Path(str(source["output_dir"])),
            jobs=jobs,
            logging=dict(_section(source, "logging")),
            phantom=_build("phantom", lambda: PhantomBankConfig.from_mapping(_section(source, "phantom"))),
            sensor=_build(
                "sensor", lambda: SensorConfig.from_mapping(_section(source, "sensor"), collection.force_target)
            ),
            collection=collection,
            calibration=_build("calibration", lambda: CalibrationConfig.from_mapping(_section(source, "calibration"))),
            augment=augment,
            model=_build("model", lambda: ModelConfig.from_mapping(_section(source, "model"), augment.target_size)),
            optimizer=_build("optimizer", lambda: OptimizerSpec.from_mapping(_section(source, "optimizer"))),
            schedule=_build("schedule", lambda: ScheduleSpec.from_mapping(_section(source, "schedule"))),
            training=_build("training", lambda: TrainingConfig.from_mapping(_section(source, "training"))),
            search=_build(
                "search",
                lambda: SearchConfig(
                    int(search["n_configs"]), float(search["val_fraction"]), float(search["overfit_gap"])
                ),
            ),
            cv=_build("cv", lambda: CVConfig(int(_section(source, "cv")["folds"]))),
            evaluate=EvalConfig(None if checkpoint is None else Path(str(checkpoint))),
            source=source,
        )

    def to_dict(self) -> dict[str, Any]:
        return full_dict_copy(self.source)

    def to_json(self) -> bytes:
        return canonical_dumps(self.source)


def resolve_config(path: Path | None = None, overrides: Mapping[str, Any] | None = None) -> RunConfig:
    """Base defaults, then the file at path, then dotted-key overrides, validated."""
    config = load_pipeline_config(path)
    for key, value in (overrides or {}).items():
        config[key] = value
    return RunConfig.from_mapping(config.as_dict())
