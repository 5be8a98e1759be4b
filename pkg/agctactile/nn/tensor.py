from __future__ import annotations

from typing import Any
from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt

from agctactile.errors import ShapeMismatch


@dataclass(slots=True, eq=False)
class Tensor:
    """
    A named array with an optional gradient buffer of the same shape.

    Trainable parameters carry requires_grad=True; batch-norm running statistics are
    tensors too, but are only ever written by the layer that owns them.
    """

    name: str
    data: npt.NDArray[Any]
    requires_grad: bool = True
    grad: npt.NDArray[Any] | None = field(default=None, repr=False)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def size(self) -> int:
        return int(self.data.size)

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data) if self.requires_grad else None

    def accumulate(self, gradient: npt.NDArray[Any]) -> None:
        if gradient.shape != self.data.shape:
            msg = f"Gradient for {self.name} has shape {gradient.shape}, expected {self.data.shape}"
            raise ShapeMismatch(msg)
        if self.grad is None:
            self.grad = gradient.astype(self.data.dtype, copy=True)
        else:
            self.grad += gradient

    def assign(self, values: npt.ArrayLike) -> None:
        array = np.asarray(values, dtype=self.data.dtype)
        if array.shape != self.data.shape:
            msg = f"Cannot assign shape {array.shape} to {self.name} of shape {self.data.shape}"
            raise ShapeMismatch(msg)
        self.data[...] = array
