"""
Semi-autonomous tactile data collection and the tumor-level train/test split.

For every phantom, contact poses are drawn until the configured number of views settle
within the force budget; poses that miss the gel are resampled through backoff with a
zero wait. Each view draws from its own generator seeded by (master seed, phantom id,
view index), so any single frame can be reproduced in isolation.
"""

from __future__ import annotations

from typing import Any, Callable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
import logging
import math

from backoff._typing import Details
from scipy.spatial.transform import Rotation
import backoff
import numpy as np

from agctactile.constants import MANIFEST_FILE, MAX_FORCE_N, VIEWS_PER_PHANTOM, WORK_AREA_MM
from agctactile.errors import InsufficientPhantoms, InvalidConfig, NoContact, RetryExhausted
from agctactile.geometry import RigidTransform, rotation_about
from agctactile.imaging import write_float32, write_ppm
from agctactile.phantom import PhantomSpec
from agctactile.primitives import PhantomId
from agctactile.tactile_sim import SensorConfig, TactileFrame, capture
from agctactile.types import BorrmannClass, Split
from agctactile.utils import derive_seed, read_json, write_json

logger = logging.getLogger(__name__)
retry_logger = logging.getLogger("contact_retry")
giveup_logger = logging.getLogger("contact_giveup")

# Phantom face-down: its +z (outward) axis points along the sensor's -z
_FACE_DOWN = np.diag([1.0, -1.0, -1.0])


@dataclass(frozen=True, slots=True)
class CollectionConfig:
    views_per_phantom: int = VIEWS_PER_PHANTOM
    force_target: float = MAX_FORCE_N
    tilt_max_deg: float = 15.0
    standoff_mm: float = 13.0
    max_retries: int = 20
    train_per_class: int = 8
    test_per_class: int = 3
    dump_deformation: bool = False

    def __post_init__(self) -> None:
        if self.views_per_phantom < 1:
            msg = f"views_per_phantom must be at least 1, got {self.views_per_phantom}"
            raise InvalidConfig(msg)
        if not 0 < self.force_target <= MAX_FORCE_N:
            msg = f"force_target must be in (0, {MAX_FORCE_N}] N, got {self.force_target}"
            raise InvalidConfig(msg)
        if not 0 <= self.tilt_max_deg <= 30 or self.max_retries < 0:
            msg = f"tilt_max_deg must be in [0, 30] and max_retries >= 0, got {self.tilt_max_deg}, {self.max_retries}"
            raise InvalidConfig(msg)
        if self.train_per_class < 1 or self.test_per_class < 1:
            msg = "Split ratio needs at least one train and one test share"
            raise InvalidConfig(msg)

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> CollectionConfig:
        return cls(
            views_per_phantom=int(data["views_per_phantom"]),
            force_target=float(data["force_target"]),
            tilt_max_deg=float(data["tilt_max_deg"]),
            standoff_mm=float(data["standoff_mm"]),
            max_retries=int(data["max_retries"]),
            train_per_class=int(data["train_per_class"]),
            test_per_class=int(data["test_per_class"]),
            dump_deformation=bool(data.get("dump_deformation", False)),
        )


@dataclass(slots=True)
class ManifestEntry:
    image_path: str
    phantom_id: PhantomId
    borrmann_class: BorrmannClass
    seed: int
    view_index: int
    pose: list[float]
    achieved_force: float
    contact_fraction: float
    split: Split = Split.UNASSIGNED

    def to_dict(self) -> dict[str, Any]:
        return {
            "image_path": self.image_path,
            "phantom_id": self.phantom_id,
            "borrmann_class": self.borrmann_class.value,
            "seed": self.seed,
            "view_index": self.view_index,
            "pose": self.pose,
            "achieved_force": self.achieved_force,
            "contact_fraction": self.contact_fraction,
            "split": self.split.value,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> ManifestEntry:
        return cls(
            image_path=str(data["image_path"]),
            phantom_id=PhantomId(data["phantom_id"]),
            borrmann_class=BorrmannClass(data["borrmann_class"]),
            seed=int(data["seed"]),
            view_index=int(data["view_index"]),
            pose=[float(value) for value in data["pose"]],
            achieved_force=float(data["achieved_force"]),
            contact_fraction=float(data["contact_fraction"]),
            split=Split(data["split"]),
        )


@dataclass(slots=True)
class DatasetManifest:
    """
    Every collected view with its provenance. Image paths are relative to root.

    Attributes:
        entries: Ordered by phantom (bank order) then view index
        config: Echo of the run configuration that produced the dataset
        root: Directory holding the manifest and the images; not serialized
    """

    entries: list[ManifestEntry]
    config: dict[str, Any] = field(default_factory=dict)
    root: Path = field(default_factory=Path)
    split_seed: int | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "entries": [entry.to_dict() for entry in self.entries],
            "config": self.config,
            "split_seed": self.split_seed,
        }

    def save(self, path: Path | None = None) -> Path:
        path = path or self.root / MANIFEST_FILE
        write_json(path, self.to_dict())
        return path

    @classmethod
    def load(cls, path: Path) -> DatasetManifest:
        data = read_json(path)
        return cls(
            entries=[ManifestEntry.from_dict(entry) for entry in data["entries"]],
            config=data.get("config", {}),
            root=path.parent,
            split_seed=data.get("split_seed"),
        )

    def image_file(self, entry: ManifestEntry) -> Path:
        return self.root / entry.image_path

    def phantom_ids(self, split: Split | None = None) -> list[PhantomId]:
        """Distinct phantom ids in manifest order, optionally restricted to one split."""
        seen: dict[PhantomId, None] = {}
        for entry in self.entries:
            if split is None or entry.split == split:
                seen.setdefault(entry.phantom_id, None)
        return list(seen)

    def entries_for(self, split: Split) -> list[ManifestEntry]:
        return [entry for entry in self.entries if entry.split == split]

    def class_of(self) -> dict[PhantomId, BorrmannClass]:
        return {entry.phantom_id: entry.borrmann_class for entry in self.entries}


def sample_contact_pose(rng: np.random.Generator, spec: PhantomSpec, cfg: CollectionConfig) -> RigidTransform:
    """
    Random face-down contact pose, phantom -> sensor.

    The phantom point under the window center is uniform over the working area, the in-plane
    rotation uniform over [0, 360) degrees, the tilt direction uniform and the tilt magnitude
    uniform over [0, tilt_max].
    """
    center = rng.uniform(0.0, WORK_AREA_MM, size=2)
    spin = rng.uniform(0.0, 360.0)
    tilt_direction = rng.uniform(0.0, 2.0 * np.pi)
    tilt = np.deg2rad(rng.uniform(0.0, cfg.tilt_max_deg))
    tilt_rotation = Rotation.from_rotvec(tilt * np.array([np.cos(tilt_direction), np.sin(tilt_direction), 0.0]))
    rotation = tilt_rotation.as_matrix() @ rotation_about("z", spin) @ _FACE_DOWN
    anchor = np.array([center[0], center[1], 0.0])
    return RigidTransform(rotation, np.array([0.0, 0.0, cfg.standoff_mm]) - rotation @ anchor)


def window_center_on_phantom(pose: RigidTransform) -> np.ndarray:
    """Backplate point (x, y) in phantom coordinates that sits under the window center."""
    rotation_t = pose.rotation.T
    # sensor z axis through the origin, intersected with the backplate plane z_P = 0
    origin = -rotation_t @ pose.translation
    direction = rotation_t @ np.array([0.0, 0.0, 1.0])
    return (origin - origin[2] / direction[2] * direction)[:2]


def contact_backoff_handler(details: Details) -> None:
    tries = details.get("tries", 0)
    spec = details.get("args", (None,))[0]
    retry_logger.debug(
        "No contact on phantom %s, resampling pose after %d tries", getattr(spec, "phantom_id", "?"), tries
    )


def contact_giveup_handler(details: Details) -> None:
    tries = details.get("tries", 0)
    spec = details.get("args", (None,))[0]
    giveup_logger.warning("Giving up on phantom %s after %d pose samples", getattr(spec, "phantom_id", "?"), tries)


def capture_view(
    spec: PhantomSpec,
    cfg: CollectionConfig,
    sensor: SensorConfig,
    rng: np.random.Generator,
) -> TactileFrame:
    """
    Draw poses from rng until one settles, at most 1 + max_retries draws.

    Raises:
        RetryExhausted: every draw ended in NoContact
    """

    def attempt(spec: PhantomSpec, rng: np.random.Generator) -> TactileFrame:
        return capture(spec, sample_contact_pose(rng, spec, cfg), sensor)

    with_retries: Callable[[PhantomSpec, np.random.Generator], TactileFrame] = backoff.on_exception(
        backoff.constant,
        NoContact,
        max_tries=cfg.max_retries + 1,
        interval=0,
        jitter=None,
        on_backoff=contact_backoff_handler,
        on_giveup=contact_giveup_handler,
    )(attempt)
    try:
        return with_retries(spec, rng)
    except NoContact as err:
        msg = f"Phantom {spec.phantom_id} found no contact after {cfg.max_retries} retries"
        raise RetryExhausted(msg, str(err)) from err


def view_seed(master_seed: int, phantom_id: str, view_index: int) -> int:
    return derive_seed(master_seed, "view", phantom_id, view_index)


def _collect_phantom(
    spec: PhantomSpec,
    cfg: CollectionConfig,
    sensor: SensorConfig,
    master_seed: int,
    dataset_dir: Path,
) -> list[ManifestEntry]:
    entries = []
    for view_index in range(cfg.views_per_phantom):
        seed = view_seed(master_seed, spec.phantom_id, view_index)
        frame = capture_view(spec, cfg, sensor, np.random.default_rng(seed))
        relative = Path(spec.phantom_id) / f"{view_index:03}.ppm"
        write_ppm(dataset_dir / relative, frame.image)
        if cfg.dump_deformation:
            write_float32((dataset_dir / relative).with_suffix(".deformation.f32"), frame.deformation)
        entries.append(
            ManifestEntry(
                image_path=relative.as_posix(),
                phantom_id=spec.phantom_id,
                borrmann_class=spec.borrmann_class,
                seed=seed,
                view_index=view_index,
                pose=frame.pose_used.to_row_major(),
                achieved_force=frame.achieved_force,
                contact_fraction=frame.contact_fraction,
            )
        )
    logger.info("Collected %d views of phantom %s", len(entries), spec.phantom_id)
    return entries


def collect_dataset(
    bank: Sequence[PhantomSpec],
    cfg: CollectionConfig,
    sensor: SensorConfig,
    master_seed: int,
    dataset_dir: Path,
    jobs: int = 1,
    config_echo: dict[str, Any] | None = None,
) -> DatasetManifest:
    """
    Capture views_per_phantom frames of every phantom, write the images and the manifest.

    Phantoms are collected in parallel; entries merge in bank order so the manifest does
    not depend on the number of workers.
    """
    sensor = replace(sensor, force_target=cfg.force_target)
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as executor:
        per_phantom = list(
            executor.map(lambda spec: _collect_phantom(spec, cfg, sensor, master_seed, dataset_dir), bank)
        )
    manifest = DatasetManifest(
        entries=[entry for entries in per_phantom for entry in entries],
        config=config_echo or {},
        root=dataset_dir,
    )
    manifest.save()
    logger.info("Wrote manifest with %d entries to %s", len(manifest.entries), dataset_dir)
    return manifest


def split_counts(phantoms: int, train_share: int = 8, test_share: int = 3) -> tuple[int, int]:
    """Per-class (train, test) counts; the ratio rounds toward train but leaves one for test."""
    if phantoms < 2:
        msg = f"A class needs at least 2 phantoms to split, got {phantoms}"
        raise InsufficientPhantoms(msg)
    train = min(math.ceil(phantoms * train_share / (train_share + test_share)), phantoms - 1)
    return train, phantoms - train


def split_train_test(
    manifest: DatasetManifest, split_seed: int, train_share: int = 8, test_share: int = 3
) -> DatasetManifest:
    """
    Tumor-level split: per class, shuffle the phantoms with split_seed and give the first
    share to train; every image of a phantom carries its phantom's split.

    Raises:
        InsufficientPhantoms: a class has fewer than 2 phantoms
    """
    rng = np.random.default_rng(split_seed)
    classes = manifest.class_of()
    assignment: dict[PhantomId, Split] = {}
    for borrmann_class in BorrmannClass:
        phantoms = sorted(phantom_id for phantom_id, owner in classes.items() if owner == borrmann_class)
        train_count, _ = split_counts(len(phantoms), train_share, test_share)
        order = rng.permutation(len(phantoms))
        for rank, index in enumerate(order):
            assignment[phantoms[index]] = Split.TRAIN if rank < train_count else Split.TEST

    entries = [replace(entry, split=assignment[entry.phantom_id]) for entry in manifest.entries]
    logger.info(
        "Split %d phantoms into %d train / %d test",
        len(assignment),
        sum(split == Split.TRAIN for split in assignment.values()),
        sum(split == Split.TEST for split in assignment.values()),
    )
    return DatasetManifest(entries=entries, config=manifest.config, root=manifest.root, split_seed=split_seed)
