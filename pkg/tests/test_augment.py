from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal
import numpy as np
import pytest

from agctactile.augment import (
    AugmentConfig,
    Standardizer,
    augment,
    augment_batch,
    blur,
    random_crop,
    resize,
    rotate,
)
from agctactile.errors import InvalidConfig, ZeroSize


@pytest.fixture
def picture(rng):
    return rng.integers(0, 256, size=(24, 20, 3)).astype(np.uint8)


def test_resize_shapes(picture):
    assert resize(picture, (8, 12)).shape == (8, 12, 3)
    assert resize(picture, (48, 40)).shape == (48, 40, 3)


def test_resize_same_size_is_a_copy(picture):
    resized = resize(picture, picture.shape[:2])
    assert_array_equal(resized, picture)
    assert resized is not picture


def test_resize_keeps_flat_images_flat():
    flat = np.full((10, 30, 3), 77, dtype=np.uint8)
    assert_array_equal(resize(flat, (16, 16)), 77)


@pytest.mark.parametrize("target", [(0, 4), (4, 0)])
def test_resize_rejects_empty_target(picture, target):
    with pytest.raises(ZeroSize):
        resize(picture, target)


def test_resize_rejects_empty_image():
    with pytest.raises(ZeroSize):
        resize(np.zeros((0, 5, 3), dtype=np.uint8), (4, 4))


def test_nothing_applied_at_zero_probability(picture, rng):
    cfg = AugmentConfig(probability=0.0)
    assert_array_equal(augment(picture, cfg, rng), picture)


def test_flips(picture, rng):
    assert_array_equal(augment(picture, AugmentConfig.only("hflip"), rng), picture[:, ::-1])
    assert_array_equal(augment(picture, AugmentConfig.only("vflip"), rng), picture[::-1, :])


def test_crop_keeps_size(picture, rng):
    cropped = random_crop(picture, AugmentConfig(crop_scale=(0.5, 0.5)), rng)
    assert cropped.shape == picture.shape


def test_rotation_round_trip(picture):
    picture = picture[:20, :20]
    there_and_back = rotate(rotate(picture, 90.0), -90.0)
    assert_allclose(there_and_back, picture, atol=1e-6)
    assert_allclose(rotate(picture, 0.0), picture, atol=1e-9)


def test_blur_keeps_flat_images_flat():
    flat = np.full((12, 12, 3), 140.0)
    assert_allclose(blur(flat, 2.0), 140.0)
    assert_allclose(blur(flat, 256.0), 140.0)


def test_blur_smooths(picture):
    assert blur(picture, 3.0).std() < picture.astype(np.float64).std()


def test_noise_changes_pixels(picture, rng):
    noisy = augment(picture, AugmentConfig.only("noise", noise_sigma=(20.0, 20.0)), rng)
    assert noisy.dtype == np.uint8
    assert not np.array_equal(noisy, picture)


def test_disabled_op_keeps_other_draws():
    """Turning crop off must not change what a later op draws."""
    image = np.random.default_rng(3).integers(0, 256, size=(16, 16, 3)).astype(np.uint8)
    with_crop_off = AugmentConfig(
        enabled={"crop": False, "hflip": False, "vflip": False, "rotate": False, "blur": False, "noise": True},
        probabilities={"noise": 1.0},
    )
    noise_only = AugmentConfig.only("noise")
    first = augment(image, with_crop_off, np.random.default_rng(9))
    second = augment(image, noise_only, np.random.default_rng(9))
    assert_array_equal(first, second)


def test_batch_seeding(picture):
    cfg = AugmentConfig(target_size=(24, 20))
    images = [picture, picture]
    first = augment_batch(images, cfg, run_seed=4, epoch=0, indices=[0, 1])
    again = augment_batch(images, cfg, run_seed=4, epoch=0, indices=[0, 1])
    later = augment_batch(images, cfg, run_seed=4, epoch=1, indices=[0, 1])
    for left, right in zip(first, again):
        assert_array_equal(left, right)
    assert any(not np.array_equal(left, right) for left, right in zip(first, later))


@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_augment_keeps_shape_and_dtype(seed):
    generator = np.random.default_rng(seed)
    image = generator.integers(0, 256, size=(18, 14, 3)).astype(np.uint8)
    out = augment(image, AugmentConfig(target_size=(18, 14), blur_sigma=(1.0, 8.0)), generator)
    assert out.shape == image.shape
    assert out.dtype == np.uint8


def test_standardizer_centers_the_training_set(rng):
    images = rng.integers(0, 256, size=(6, 8, 8, 3)).astype(np.uint8)
    images[..., 2] = 50
    scaler = Standardizer.fit(images)
    data = scaler(images, dtype=np.float64)
    assert data.shape == (6, 3, 8, 8)
    assert_allclose(data.mean(axis=(0, 2, 3)), 0.0, atol=1e-9)
    assert_allclose(data[:, :2].std(axis=(0, 2, 3)), 1.0, atol=1e-9)
    assert scaler.std[2] == 1.0
    assert Standardizer.from_dict(scaler.to_dict()) == scaler


def test_standardizer_needs_images():
    with pytest.raises(ZeroSize):
        Standardizer.fit([])


@pytest.mark.parametrize(
    "overrides",
    [
        {"crop_scale": (0.5, 1.2)},
        {"blur_sigma": (0.0, 1.0)},
        {"noise_sigma": (5.0, 1.0)},
        {"rotation_deg": -1.0},
        {"probability": 1.5},
        {"enabled": {"sharpen": True}},
        {"target_size": (0, 10)},
    ],
)
def test_config_validation(overrides):
    with pytest.raises(InvalidConfig):
        AugmentConfig(**overrides)
