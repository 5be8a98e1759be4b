"""Binary PPM (P6, maxval 255) image files."""

from __future__ import annotations

from pathlib import Path

from PIL import Image
import numpy as np
import numpy.typing as npt


def write_ppm(path: Path, image: npt.NDArray[np.uint8]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.ascontiguousarray(image, dtype=np.uint8), mode="RGB").save(path, format="PPM")


def read_ppm(path: Path) -> npt.NDArray[np.uint8]:
    """(H, W, 3) uint8 array."""
    with Image.open(path) as image:
        return np.asarray(image.convert("RGB"), dtype=np.uint8).copy()


def write_float32(path: Path, data: npt.NDArray[np.floating]) -> None:
    """Little-endian float32 dump, row-major."""
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(np.ascontiguousarray(data, dtype="<f4").tobytes())
