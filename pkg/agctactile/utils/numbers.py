"""
Number manipulation utilities.

Half-up rounding of unit-interval intensities into bytes.
"""

from __future__ import annotations

import numpy as np
import numpy.typing as npt


def to_bytes_half_up(values: npt.NDArray[np.floating], scale: float = 255.0) -> npt.NDArray[np.uint8]:
    """
    Scale an array, round halves up and clamp into the byte range.

    Args:
        values: Intensities, usually already in [0, 1]
        scale: Multiplier applied before rounding

    Returns:
        Array of the same shape with dtype uint8
    """
    return np.clip(np.floor(values * scale + 0.5), 0, 255).astype(np.uint8)
