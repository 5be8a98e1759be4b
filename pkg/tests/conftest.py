from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from agctactile.collection import CollectionConfig
from agctactile.dataset import ImageSet
from agctactile.nn import ModelConfig
from agctactile.phantom import PhantomBankConfig
from agctactile.primitives import PhantomId
from agctactile.tactile_sim import SensorConfig
from agctactile.types import Arch
from agctactile.workcell import CalibrationConfig


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture
def calibration_cfg() -> CalibrationConfig:
    return CalibrationConfig()


@pytest.fixture
def small_bank_cfg() -> PhantomBankConfig:
    """Coarse grid, three phantoms per class: enough for splits and folds at test speed."""
    return PhantomBankConfig(grid_size=48, per_class=3)


@pytest.fixture
def small_sensor_cfg() -> SensorConfig:
    return SensorConfig(resolution=(32, 32))


@pytest.fixture
def small_collection_cfg() -> CollectionConfig:
    return CollectionConfig(views_per_phantom=2)


@pytest.fixture
def tiny_model_cfg() -> ModelConfig:
    return ModelConfig(
        arch=Arch.DILATED_RESNET,
        input_size=(16, 16),
        widths=(4, 8, 8),
        blocks=(1, 1, 1),
        dilations=(1, 2, 4),
    )


def synthetic_image_set(per_class: int = 2, phantoms_per_class: int = 3, size: int = 16, seed: int = 0) -> ImageSet:
    """Class-coded images: class c brightens channel c % 3 and stripes with period c + 2."""
    generator = np.random.default_rng(seed)
    images = []
    labels = []
    owners = []
    columns = np.arange(size)
    for label in range(4):
        for phantom in range(phantoms_per_class):
            for _ in range(per_class):
                image = generator.integers(0, 40, size=(size, size, 3)).astype(np.int64)
                image[..., label % 3] += 120
                image[:, columns % (label + 2) == 0, :] += 80
                images.append(np.clip(image, 0, 255).astype(np.uint8))
                labels.append(label)
                owners.append(PhantomId(f"{'I II III IV'.split()[label]}-{phantom:02}"))
    return ImageSet(np.stack(images), np.array(labels, dtype=np.int64), tuple(owners))


@pytest.fixture
def image_set() -> ImageSet:
    return synthetic_image_set()


@pytest.fixture
def out_dir(tmp_path: Path) -> Path:
    return tmp_path / "out"
