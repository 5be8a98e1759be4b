"""
Layers with explicit forward/backward passes over (N, C, H, W) arrays.

Each layer caches what its backward pass needs during forward; backward must be
called at most once per forward and accumulates into the parameters' grad buffers.
"""

from __future__ import annotations

from typing import Any, Iterator, Sequence
from abc import ABC, abstractmethod

import numpy as np
import numpy.typing as npt

from agctactile.constants import BATCH_NORM_EPSILON, BATCH_NORM_MOMENTUM
from agctactile.errors import InvalidConfig, LabelOutOfRange, ShapeMismatch, SingularBatch
from agctactile.nn.tensor import Tensor

Array = npt.NDArray[Any]


def he_normal(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, dtype: npt.DTypeLike) -> Array:
    return (rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)).astype(dtype)


class Layer(ABC):
    def __init__(self, name: str) -> None:
        self.name = name

    @abstractmethod
    def forward(self, x: Array, training: bool = False) -> Array: ...

    @abstractmethod
    def backward(self, grad: Array) -> Array: ...

    def parameters(self) -> list[Tensor]:
        return []

    def buffers(self) -> list[Tensor]:
        return []

    def __call__(self, x: Array, training: bool = False) -> Array:
        return self.forward(x, training)

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.name})"


class Conv2d(Layer):
    """
    Cross-correlation with dilated taps.

    Output size per axis is floor((H + 2 padding - dilation (k - 1) - 1) / stride) + 1. The
    forward pass walks the k*k taps and contracts each strided input window against that
    tap's (out, in) weight slice, so no im2col buffer is ever materialized.
    """

    def __init__(
        self,
        name: str,
        in_channels: int,
        out_channels: int,
        kernel_size: int,
        stride: int = 1,
        padding: int = 0,
        dilation: int = 1,
        bias: bool = True,
        rng: np.random.Generator | None = None,
        dtype: npt.DTypeLike = np.float32,
    ) -> None:
        super().__init__(name)
        if min(in_channels, out_channels, kernel_size, stride, dilation) < 1 or padding < 0:
            msg = f"Invalid convolution geometry for {name}"
            raise InvalidConfig(msg)
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.stride = stride
        self.padding = padding
        self.dilation = dilation
        rng = rng or np.random.default_rng(0)
        fan_in = in_channels * kernel_size * kernel_size
        self.weight = Tensor(
            f"{name}.weight", he_normal(rng, (out_channels, in_channels, kernel_size, kernel_size), fan_in, dtype)
        )
        self.bias = Tensor(f"{name}.bias", np.zeros(out_channels, dtype=dtype)) if bias else None
        self._padded: Array | None = None
        self._input_shape: tuple[int, ...] = ()

    def parameters(self) -> list[Tensor]:
        return [self.weight] if self.bias is None else [self.weight, self.bias]

    def output_size(self, height: int, width: int) -> tuple[int, int]:
        span = self.dilation * (self.kernel_size - 1) + 1
        return (
            (height + 2 * self.padding - span) // self.stride + 1,
            (width + 2 * self.padding - span) // self.stride + 1,
        )

    def _windows(self, padded: Array, out_h: int, out_w: int) -> Iterator[tuple[int, int, tuple[slice, ...]]]:
        for i in range(self.kernel_size):
            for j in range(self.kernel_size):
                top, left = i * self.dilation, j * self.dilation
                yield i, j, (
                    slice(None),
                    slice(None),
                    slice(top, top + self.stride * (out_h - 1) + 1, self.stride),
                    slice(left, left + self.stride * (out_w - 1) + 1, self.stride),
                )

    def forward(self, x: Array, training: bool = False) -> Array:
        if x.ndim != 4 or x.shape[1] != self.in_channels:
            msg = f"{self.name} expects (N, {self.in_channels}, H, W), got {x.shape}"
            raise ShapeMismatch(msg)
        out_h, out_w = self.output_size(x.shape[2], x.shape[3])
        if out_h < 1 or out_w < 1:
            msg = f"{self.name} input {x.shape[2:]} is too small for its kernel"
            raise ShapeMismatch(msg)
        pad = self.padding
        padded = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
        out = np.zeros((x.shape[0], self.out_channels, out_h, out_w), dtype=np.result_type(x, self.weight.data))
        for i, j, window in self._windows(padded, out_h, out_w):
            # (N, C, h, w) x (O, C) -> (N, h, w, O)
            out += np.moveaxis(np.tensordot(padded[window], self.weight.data[:, :, i, j], axes=([1], [1])), -1, 1)
        if self.bias is not None:
            out += self.bias.data[None, :, None, None]
        self._padded = padded
        self._input_shape = x.shape
        return out

    def backward(self, grad: Array) -> Array:
        if self._padded is None:
            msg = f"{self.name}.backward called before forward"
            raise ShapeMismatch(msg)
        padded = self._padded
        out_h, out_w = grad.shape[2], grad.shape[3]
        d_padded = np.zeros_like(padded)
        d_weight = np.zeros_like(self.weight.data)
        for i, j, window in self._windows(padded, out_h, out_w):
            d_weight[:, :, i, j] = np.tensordot(grad, padded[window], axes=([0, 2, 3], [0, 2, 3]))
            # (N, O, h, w) x (O, C) -> (N, h, w, C)
            d_padded[window] += np.moveaxis(np.tensordot(grad, self.weight.data[:, :, i, j], axes=([1], [0])), -1, 1)
        self.weight.accumulate(d_weight)
        if self.bias is not None:
            self.bias.accumulate(grad.sum(axis=(0, 2, 3)))
        self._padded = None
        pad = self.padding
        height, width = self._input_shape[2], self._input_shape[3]
        return d_padded[:, :, pad : pad + height, pad : pad + width]


class BatchNorm2d(Layer):
    """
    Per-channel normalization. Training uses batch statistics and updates the running
    mean and the running (unbiased) variance; evaluation uses the running values.
    """

    def __init__(
        self,
        name: str,
        channels: int,
        eps: float = BATCH_NORM_EPSILON,
        momentum: float = BATCH_NORM_MOMENTUM,
        dtype: npt.DTypeLike = np.float32,
    ) -> None:
        super().__init__(name)
        self.channels = channels
        self.eps = eps
        self.momentum = momentum
        self.gamma = Tensor(f"{name}.gamma", np.ones(channels, dtype=dtype))
        self.beta = Tensor(f"{name}.beta", np.zeros(channels, dtype=dtype))
        self.running_mean = Tensor(f"{name}.running_mean", np.zeros(channels, dtype=dtype), requires_grad=False)
        self.running_var = Tensor(f"{name}.running_var", np.ones(channels, dtype=dtype), requires_grad=False)
        self._cache: tuple[Array, Array, bool] | None = None

    def parameters(self) -> list[Tensor]:
        return [self.gamma, self.beta]

    def buffers(self) -> list[Tensor]:
        return [self.running_mean, self.running_var]

    def forward(self, x: Array, training: bool = False) -> Array:
        if x.ndim != 4 or x.shape[1] != self.channels:
            msg = f"{self.name} expects (N, {self.channels}, H, W), got {x.shape}"
            raise ShapeMismatch(msg)
        if training:
            if x.shape[0] < 2:
                msg = f"{self.name} cannot normalize a batch of size {x.shape[0]} in training mode"
                raise SingularBatch(msg)
            count = x.shape[0] * x.shape[2] * x.shape[3]
            mean = x.mean(axis=(0, 2, 3))
            var = x.var(axis=(0, 2, 3))
            momentum = self.momentum
            self.running_mean.assign((1 - momentum) * self.running_mean.data + momentum * mean)
            self.running_var.assign((1 - momentum) * self.running_var.data + momentum * var * count / (count - 1))
        else:
            mean = self.running_mean.data
            var = self.running_var.data
        inv_std = 1.0 / np.sqrt(var + self.eps)
        normalized = (x - mean[None, :, None, None]) * inv_std[None, :, None, None]
        self._cache = (normalized, inv_std, training)
        return self.gamma.data[None, :, None, None] * normalized + self.beta.data[None, :, None, None]

    def backward(self, grad: Array) -> Array:
        if self._cache is None:
            msg = f"{self.name}.backward called before forward"
            raise ShapeMismatch(msg)
        normalized, inv_std, training = self._cache
        self._cache = None
        self.gamma.accumulate((grad * normalized).sum(axis=(0, 2, 3)))
        self.beta.accumulate(grad.sum(axis=(0, 2, 3)))
        d_normalized = grad * self.gamma.data[None, :, None, None]
        scale = inv_std[None, :, None, None]
        if not training:
            return d_normalized * scale
        count = grad.shape[0] * grad.shape[2] * grad.shape[3]
        mean_d = d_normalized.sum(axis=(0, 2, 3), keepdims=True) / count
        mean_dx = (d_normalized * normalized).sum(axis=(0, 2, 3), keepdims=True) / count
        return scale * (d_normalized - mean_d - normalized * mean_dx)


class ReLU(Layer):
    def __init__(self, name: str = "relu") -> None:
        super().__init__(name)
        self._mask: Array | None = None

    def forward(self, x: Array, training: bool = False) -> Array:
        self._mask = x > 0
        return np.where(self._mask, x, 0).astype(x.dtype, copy=False)

    def backward(self, grad: Array) -> Array:
        assert self._mask is not None
        return np.where(self._mask, grad, 0).astype(grad.dtype, copy=False)


class MaxPool2d(Layer):
    """Non-overlapping max pooling; spatial dims must divide by the kernel size."""

    def __init__(self, name: str, kernel_size: int = 2) -> None:
        super().__init__(name)
        self.kernel_size = kernel_size
        self._cache: tuple[tuple[int, ...], Array] | None = None

    def forward(self, x: Array, training: bool = False) -> Array:
        k = self.kernel_size
        n, c, h, w = x.shape
        if h % k or w % k:
            msg = f"{self.name} needs spatial dims divisible by {k}, got {(h, w)}"
            raise ShapeMismatch(msg)
        # (N, C, H/k, W/k, k*k)
        blocks = x.reshape(n, c, h // k, k, w // k, k).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h // k, w // k, k * k)
        winners = blocks.argmax(axis=-1)
        self._cache = (x.shape, winners)
        return np.take_along_axis(blocks, winners[..., None], axis=-1)[..., 0]

    def backward(self, grad: Array) -> Array:
        assert self._cache is not None
        shape, winners = self._cache
        k = self.kernel_size
        n, c, h, w = shape
        blocks = np.zeros((n, c, h // k, w // k, k * k), dtype=grad.dtype)
        np.put_along_axis(blocks, winners[..., None], grad[..., None], axis=-1)
        return blocks.reshape(n, c, h // k, w // k, k, k).transpose(0, 1, 2, 4, 3, 5).reshape(shape)


class GlobalAvgPool2d(Layer):
    def __init__(self, name: str = "pool") -> None:
        super().__init__(name)
        self._shape: tuple[int, ...] = ()

    def forward(self, x: Array, training: bool = False) -> Array:
        self._shape = x.shape
        return x.mean(axis=(2, 3))

    def backward(self, grad: Array) -> Array:
        n, c, h, w = self._shape
        return np.broadcast_to(grad[:, :, None, None] / (h * w), (n, c, h, w)).copy()


class Flatten(Layer):
    def __init__(self, name: str = "flatten") -> None:
        super().__init__(name)
        self._shape: tuple[int, ...] = ()

    def forward(self, x: Array, training: bool = False) -> Array:
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad: Array) -> Array:
        return grad.reshape(self._shape)


class Linear(Layer):
    def __init__(
        self,
        name: str,
        in_features: int,
        out_features: int,
        rng: np.random.Generator | None = None,
        dtype: npt.DTypeLike = np.float32,
    ) -> None:
        super().__init__(name)
        if min(in_features, out_features) < 1:
            msg = f"Invalid linear layer size {in_features} -> {out_features}"
            raise InvalidConfig(msg)
        rng = rng or np.random.default_rng(0)
        self.in_features = in_features
        self.weight = Tensor(f"{name}.weight", he_normal(rng, (out_features, in_features), in_features, dtype))
        self.bias = Tensor(f"{name}.bias", np.zeros(out_features, dtype=dtype))
        self._input: Array | None = None

    def parameters(self) -> list[Tensor]:
        return [self.weight, self.bias]

    def forward(self, x: Array, training: bool = False) -> Array:
        if x.ndim != 2 or x.shape[1] != self.in_features:
            msg = f"{self.name} expects (N, {self.in_features}), got {x.shape}"
            raise ShapeMismatch(msg)
        self._input = x
        return x @ self.weight.data.T + self.bias.data

    def backward(self, grad: Array) -> Array:
        assert self._input is not None
        self.weight.accumulate(grad.T @ self._input)
        self.bias.accumulate(grad.sum(axis=0))
        return grad @ self.weight.data


class Sequential(Layer):
    def __init__(self, name: str, layers: Sequence[Layer]) -> None:
        super().__init__(name)
        self.layers = list(layers)

    def forward(self, x: Array, training: bool = False) -> Array:
        for layer in self.layers:
            x = layer.forward(x, training)
        return x

    def backward(self, grad: Array) -> Array:
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def parameters(self) -> list[Tensor]:
        return [tensor for layer in self.layers for tensor in layer.parameters()]

    def buffers(self) -> list[Tensor]:
        return [tensor for layer in self.layers for tensor in layer.buffers()]


class ResidualBlock(Layer):
    """
    out = relu(bn2(conv2(relu(bn1(conv1(x))))) + shortcut(x))

    Both 3x3 convolutions share the block's dilation and pad by it, so only the first one's
    stride changes the spatial size. The shortcut is the identity unless stride or width
    change, in which case it is a strided 1x1 convolution followed by batch norm.
    """

    def __init__(
        self,
        name: str,
        in_channels: int,
        out_channels: int,
        stride: int = 1,
        dilation: int = 1,
        rng: np.random.Generator | None = None,
        dtype: npt.DTypeLike = np.float32,
    ) -> None:
        super().__init__(name)
        rng = rng or np.random.default_rng(0)
        self.main = Sequential(
            f"{name}.main",
            [
                Conv2d(f"{name}.conv1", in_channels, out_channels, 3, stride, dilation, dilation, False, rng, dtype),
                BatchNorm2d(f"{name}.bn1", out_channels, dtype=dtype),
                ReLU(f"{name}.relu1"),
                Conv2d(f"{name}.conv2", out_channels, out_channels, 3, 1, dilation, dilation, False, rng, dtype),
                BatchNorm2d(f"{name}.bn2", out_channels, dtype=dtype),
            ],
        )
        self.shortcut: Sequential | None = None
        if stride != 1 or in_channels != out_channels:
            self.shortcut = Sequential(
                f"{name}.shortcut",
                [
                    Conv2d(f"{name}.proj", in_channels, out_channels, 1, stride, 0, 1, False, rng, dtype),
                    BatchNorm2d(f"{name}.proj_bn", out_channels, dtype=dtype),
                ],
            )
        self.activation = ReLU(f"{name}.relu_out")

    def forward(self, x: Array, training: bool = False) -> Array:
        residual = self.main.forward(x, training)
        identity = x if self.shortcut is None else self.shortcut.forward(x, training)
        if residual.shape != identity.shape:
            msg = f"{self.name} residual {residual.shape} does not match shortcut {identity.shape}"
            raise ShapeMismatch(msg)
        return self.activation.forward(residual + identity, training)

    def backward(self, grad: Array) -> Array:
        grad = self.activation.backward(grad)
        d_main = self.main.backward(grad)
        d_short = grad if self.shortcut is None else self.shortcut.backward(grad)
        return d_main + d_short

    def parameters(self) -> list[Tensor]:
        shortcut = [] if self.shortcut is None else self.shortcut.parameters()
        return self.main.parameters() + shortcut

    def buffers(self) -> list[Tensor]:
        shortcut = [] if self.shortcut is None else self.shortcut.buffers()
        return self.main.buffers() + shortcut


def softmax(logits: Array) -> Array:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def softmax_cross_entropy(logits: Array, labels: npt.ArrayLike) -> tuple[float, Array]:
    """
    Mean softmax cross-entropy over the batch and its gradient with respect to the logits.

    Raises:
        LabelOutOfRange: a label outside [0, num_classes)
        ShapeMismatch: labels and logits disagree on the batch size
    """
    labels = np.asarray(labels, dtype=np.int64)
    batch, classes = logits.shape
    if labels.shape != (batch,):
        msg = f"Expected {batch} labels, got shape {labels.shape}"
        raise ShapeMismatch(msg)
    if labels.size and (labels.min() < 0 or labels.max() >= classes):
        msg = f"Labels must be in [0, {classes}), got {sorted(set(labels.tolist()))}"
        raise LabelOutOfRange(msg)
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    picked = shifted[np.arange(batch), labels]
    loss = float(np.mean(log_norm - picked))
    grad = softmax(logits)
    grad[np.arange(batch), labels] -= 1.0
    return loss, grad / batch
