"""In-memory image sets read from a dataset manifest."""

from __future__ import annotations

from typing import Any, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import logging

import numpy as np
import numpy.typing as npt

from agctactile.augment import resize
from agctactile.collection import DatasetManifest, ManifestEntry
from agctactile.imaging import read_ppm
from agctactile.primitives import PhantomId
from agctactile.types import Split

logger = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class ImageSet:
    """
    Images resized to the classifier input, with integer labels and owning phantoms.

    Attributes:
        images: (N, H, W, 3) uint8
        labels: (N,) int64 class indices
        phantom_ids: Owner of each image, for tumor-level splits
    """

    images: npt.NDArray[np.uint8]
    labels: npt.NDArray[np.int64]
    phantom_ids: tuple[PhantomId, ...]

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, indices: Sequence[int] | npt.NDArray[Any]) -> ImageSet:
        index = np.asarray(indices, dtype=np.int64)
        return ImageSet(self.images[index], self.labels[index], tuple(self.phantom_ids[i] for i in index))

    def for_phantoms(self, phantom_ids: Sequence[str]) -> ImageSet:
        wanted = set(phantom_ids)
        return self.subset([i for i, owner in enumerate(self.phantom_ids) if owner in wanted])

    def unique_phantoms(self) -> list[PhantomId]:
        return list(dict.fromkeys(self.phantom_ids))

    def phantom_labels(self) -> dict[PhantomId, int]:
        return {owner: int(label) for owner, label in zip(self.phantom_ids, self.labels)}


def load_entries(
    manifest: DatasetManifest,
    entries: Sequence[ManifestEntry],
    target_size: Sequence[int],
    jobs: int = 1,
) -> ImageSet:
    def load(entry: ManifestEntry) -> npt.NDArray[np.uint8]:
        return resize(read_ppm(manifest.image_file(entry)), target_size)

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as executor:
        images = list(executor.map(load, entries))
    height, width = int(target_size[0]), int(target_size[1])
    return ImageSet(
        images=np.stack(images) if images else np.zeros((0, height, width, 3), dtype=np.uint8),
        labels=np.array([entry.borrmann_class.label for entry in entries], dtype=np.int64),
        phantom_ids=tuple(entry.phantom_id for entry in entries),
    )


def load_split(manifest: DatasetManifest, split: Split, target_size: Sequence[int], jobs: int = 1) -> ImageSet:
    entries = manifest.entries_for(split)
    logger.info("Loading %d %s images at %sx%s", len(entries), split.value, *target_size)
    return load_entries(manifest, entries, target_size, jobs)
