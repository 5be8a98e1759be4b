"""
Image preprocessing and stochastic augmentation.

- resize: bilinear stretch to the classifier input size
- augment: crop, flips, rotation, blur and noise, each on an independent coin flip
- Standardizer: per-channel mean/std taken from the training split
"""

from __future__ import annotations

from typing import Any, Iterable, Mapping, Sequence
from dataclasses import dataclass, field
import logging

from PIL import Image
from scipy import ndimage
import numpy as np
import numpy.typing as npt

from agctactile.errors import InvalidConfig, ZeroSize
from agctactile.utils import derive_seed, to_bytes_half_up

logger = logging.getLogger(__name__)

AUGMENT_OPS = ("crop", "hflip", "vflip", "rotate", "blur", "noise")


@dataclass(frozen=True, slots=True)
class AugmentConfig:
    target_size: tuple[int, int] = (224, 224)
    rotation_deg: float = 45.0
    crop_scale: tuple[float, float] = (0.7, 1.0)
    blur_sigma: tuple[float, float] = (1.0, 256.0)
    noise_sigma: tuple[float, float] = (1.0, 50.0)
    probability: float = 0.5
    enabled: Mapping[str, bool] = field(default_factory=lambda: dict.fromkeys(AUGMENT_OPS, True))
    probabilities: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if min(self.target_size) < 1:
            msg = f"target_size must be positive, got {self.target_size}"
            raise InvalidConfig(msg)
        for name, low_high in (
            ("crop_scale", self.crop_scale),
            ("blur_sigma", self.blur_sigma),
            ("noise_sigma", self.noise_sigma),
        ):
            if not 0 < low_high[0] <= low_high[1]:
                msg = f"{name} must be a positive ordered range, got {low_high}"
                raise InvalidConfig(msg)
        if self.crop_scale[1] > 1:
            msg = f"crop_scale cannot exceed 1, got {self.crop_scale}"
            raise InvalidConfig(msg)
        if self.rotation_deg < 0:
            msg = f"rotation_deg is the half-width of a symmetric range, got {self.rotation_deg}"
            raise InvalidConfig(msg)
        unknown = (set(self.enabled) | set(self.probabilities)) - set(AUGMENT_OPS)
        if unknown:
            msg = f"Unknown augmentation ops: {sorted(unknown)}"
            raise InvalidConfig(msg)
        for op in AUGMENT_OPS:
            if not 0 <= self.probability_of(op) <= 1:
                msg = f"Probability for {op} must be in [0, 1], got {self.probability_of(op)}"
                raise InvalidConfig(msg)

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> AugmentConfig:
        return cls(
            target_size=tuple(int(side) for side in data["target_size"]),  # type: ignore[arg-type]
            rotation_deg=float(data["rotation_deg"]),
            crop_scale=tuple(float(v) for v in data["crop_scale"]),  # type: ignore[arg-type]
            blur_sigma=tuple(float(v) for v in data["blur_sigma"]),  # type: ignore[arg-type]
            noise_sigma=tuple(float(v) for v in data["noise_sigma"]),  # type: ignore[arg-type]
            probability=float(data["probability"]),
            enabled={op: bool(data.get("enabled", {}).get(op, True)) for op in AUGMENT_OPS},
            probabilities={op: float(p) for op, p in data.get("probabilities", {}).items()},
        )

    @classmethod
    def only(cls, *ops: str, probability: float = 1.0, **overrides: Any) -> AugmentConfig:
        """Config with just the named ops switched on."""
        return cls(enabled={op: op in ops for op in AUGMENT_OPS}, probability=probability, **overrides)

    def probability_of(self, op: str) -> float:
        if not self.enabled.get(op, True):
            return 0.0
        return self.probabilities.get(op, self.probability)


def resize(image: npt.NDArray[np.uint8], target_size: Sequence[int]) -> npt.NDArray[np.uint8]:
    """
    Bilinear stretch to (height, width); aspect ratio is not kept.

    Raises:
        ZeroSize: empty input or target
    """
    height, width = int(target_size[0]), int(target_size[1])
    if image.size == 0 or height < 1 or width < 1:
        msg = f"Cannot resize {image.shape} to {(height, width)}"
        raise ZeroSize(msg)
    if image.shape[:2] == (height, width):
        return image.copy()
    source = Image.fromarray(np.ascontiguousarray(image, dtype=np.uint8))
    return np.asarray(source.resize((width, height), resample=Image.Resampling.BILINEAR), dtype=np.uint8).copy()


def random_crop(image: npt.NDArray[np.uint8], cfg: AugmentConfig, rng: np.random.Generator) -> npt.NDArray[np.uint8]:
    """Keep a uniform sub-rectangle of area fraction in crop_scale, resized back to the input size."""
    height, width = image.shape[:2]
    side = np.sqrt(rng.uniform(*cfg.crop_scale))
    crop_h = max(1, int(round(height * side)))
    crop_w = max(1, int(round(width * side)))
    top = int(rng.integers(0, height - crop_h + 1))
    left = int(rng.integers(0, width - crop_w + 1))
    return resize(image[top : top + crop_h, left : left + crop_w], (height, width))


def rotate(image: npt.NDArray[np.floating], degrees: float) -> npt.NDArray[np.float64]:
    """Counter-clockwise rotation about the image center, bilinear with edge-clamp fill."""
    return ndimage.rotate(
        np.asarray(image, dtype=np.float64), degrees, axes=(1, 0), reshape=False, order=1, mode="nearest"
    )


def blur(image: npt.NDArray[np.floating], sigma: float) -> npt.NDArray[np.float64]:
    """Separable Gaussian with the kernel cut at min(3 sigma, image side) per axis."""
    result = np.asarray(image, dtype=np.float64)
    for axis in (0, 1):
        radius = max(1, int(min(3.0 * sigma, result.shape[axis])))
        result = ndimage.gaussian_filter1d(result, sigma, axis=axis, radius=radius, mode="reflect")
    return result


def augment(image: npt.NDArray[np.uint8], cfg: AugmentConfig, rng: np.random.Generator) -> npt.NDArray[np.uint8]:
    """
    Apply crop, hflip, vflip, rotate, blur and noise in that order, each iff its own uniform
    draw falls under the op's probability. One draw is taken per op whether or not it is enabled,
    so switching an op off does not shift the random stream of the others.
    """
    draws = rng.uniform(size=len(AUGMENT_OPS))
    applied = {op: bool(draw < cfg.probability_of(op)) for op, draw in zip(AUGMENT_OPS, draws)}
    if not any(applied.values()):
        return image.copy()

    work: npt.NDArray[Any] = image
    if applied["crop"]:
        work = random_crop(work, cfg, rng)
    if applied["hflip"]:
        work = work[:, ::-1]
    if applied["vflip"]:
        work = work[::-1, :]
    work = np.asarray(work, dtype=np.float64)
    if applied["rotate"]:
        work = rotate(work, rng.uniform(-cfg.rotation_deg, cfg.rotation_deg))
    if applied["blur"]:
        work = blur(work, rng.uniform(*cfg.blur_sigma))
    if applied["noise"]:
        work = work + rng.normal(0.0, rng.uniform(*cfg.noise_sigma), size=work.shape)
    return to_bytes_half_up(work, scale=1.0)


def augment_batch(
    images: Iterable[npt.NDArray[np.uint8]],
    cfg: AugmentConfig,
    run_seed: int,
    epoch: int,
    indices: Sequence[int],
) -> list[npt.NDArray[np.uint8]]:
    """Augment each image with its own generator seeded by (run seed, epoch, sample index)."""
    return [
        augment(image, cfg, np.random.default_rng(derive_seed(run_seed, "augment", epoch, int(index))))
        for image, index in zip(images, indices)
    ]


@dataclass(frozen=True, slots=True)
class Standardizer:
    """Per-channel affine map to zero mean, unit variance in the training split."""

    mean: tuple[float, ...]
    std: tuple[float, ...]

    @classmethod
    def identity(cls, channels: int = 3) -> Standardizer:
        return cls(mean=(0.0,) * channels, std=(1.0,) * channels)

    @classmethod
    def fit(cls, images: Iterable[npt.NDArray[np.uint8]]) -> Standardizer:
        """Mean/std over every pixel of the given images, in the [0, 1] domain."""
        total = None
        total_sq = None
        count = 0
        for image in images:
            pixels = np.asarray(image, dtype=np.float64).reshape(-1, image.shape[-1]) / 255.0
            total = pixels.sum(axis=0) if total is None else total + pixels.sum(axis=0)
            total_sq = (pixels**2).sum(axis=0) if total_sq is None else total_sq + (pixels**2).sum(axis=0)
            count += pixels.shape[0]
        if total is None or total_sq is None:
            msg = "Cannot fit a standardizer on no images"
            raise ZeroSize(msg)
        mean = total / count
        std = np.sqrt(np.maximum(total_sq / count - mean**2, 0.0))
        std = np.where(std > 1e-6, std, 1.0)
        logger.debug("Standardizer fit on %d pixels: mean=%s std=%s", count, mean, std)
        return cls(mean=tuple(float(v) for v in mean), std=tuple(float(v) for v in std))

    def __call__(self, images: npt.NDArray[np.uint8], dtype: npt.DTypeLike = np.float32) -> npt.NDArray[Any]:
        """(N, H, W, C) bytes -> (N, C, H, W) standardized tensor."""
        data = np.asarray(images, dtype=np.float64) / 255.0
        data = (data - np.asarray(self.mean)) / np.asarray(self.std)
        return np.ascontiguousarray(np.moveaxis(data, -1, 1), dtype=dtype)

    def to_dict(self) -> dict[str, list[float]]:
        return {"mean": list(self.mean), "std": list(self.std)}

    @classmethod
    def from_dict(cls, data: Mapping[str, Sequence[float]]) -> Standardizer:
        return cls(mean=tuple(float(v) for v in data["mean"]), std=tuple(float(v) for v in data["std"]))
