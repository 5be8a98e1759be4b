"""
The three classifier archetypes.

- dilated_resnet: stride-2 first stage, then dilated stages that keep the spatial resolution
- resnet_baseline: same residual layout, dilation 1 everywhere, stride-2 downsampling per stage
- alexnet_baseline: five plain convolutions, three max pools, two fully connected layers
"""

from __future__ import annotations

from typing import Any, Final, Mapping, Sequence
from dataclasses import dataclass
import logging

import numpy as np
import numpy.typing as npt

from agctactile.constants import NUM_CLASSES
from agctactile.errors import InvalidConfig, ShapeMismatch
from agctactile.nn.layers import (
    BatchNorm2d,
    Conv2d,
    Flatten,
    GlobalAvgPool2d,
    Layer,
    Linear,
    MaxPool2d,
    ReLU,
    ResidualBlock,
    Sequential,
    softmax,
    softmax_cross_entropy,
)
from agctactile.nn.tensor import Tensor
from agctactile.types import Arch

logger = logging.getLogger(__name__)

Array = npt.NDArray[Any]

# Full-scale trainable parameter counts of each family, kept as documentation metadata
REFERENCE_PARAMETER_COUNTS: Final[dict[Arch, int]] = {
    Arch.DILATED_RESNET: 2_800_000,
    Arch.RESNET_BASELINE: 11_200_000,
    Arch.ALEXNET_BASELINE: 57_000_000,
}

_ALEXNET_DOWNSAMPLING = 16


@dataclass(frozen=True, slots=True)
class ModelConfig:
    arch: Arch = Arch.DILATED_RESNET
    input_size: tuple[int, int] = (224, 224)
    in_channels: int = 3
    widths: tuple[int, ...] = (16, 32, 64)
    blocks: tuple[int, ...] = (2, 2, 2)
    dilations: tuple[int, ...] = (1, 2, 4)
    num_classes: int = NUM_CLASSES

    def __post_init__(self) -> None:
        if not len(self.widths) == len(self.blocks) == len(self.dilations) or not self.widths:
            msg = (
                "widths, blocks and dilations need one entry per stage, "
                f"got {self.widths}, {self.blocks}, {self.dilations}"
            )
            raise InvalidConfig(msg)
        if min(self.widths) < 1 or min(self.blocks) < 1 or min(self.dilations) < 1:
            msg = "Stage widths, block counts and dilations must all be at least 1"
            raise InvalidConfig(msg)
        if self.num_classes < 2 or self.in_channels < 1 or min(self.input_size) < 1:
            msg = f"Bad classifier shape: {self.in_channels} channels, {self.input_size}, {self.num_classes} classes"
            raise InvalidConfig(msg)
        if self.arch == Arch.DILATED_RESNET and any(b <= a for a, b in zip(self.dilations, self.dilations[1:])):
            msg = f"dilated_resnet needs strictly increasing dilations, got {self.dilations}"
            raise InvalidConfig(msg)
        if self.arch == Arch.ALEXNET_BASELINE:
            if len(self.widths) < 3:
                msg = "alexnet_baseline needs at least three widths"
                raise InvalidConfig(msg)
            if any(side % _ALEXNET_DOWNSAMPLING for side in self.input_size):
                msg = f"alexnet_baseline input must divide by {_ALEXNET_DOWNSAMPLING}, got {self.input_size}"
                raise InvalidConfig(msg)

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any], input_size: Sequence[int] | None = None) -> ModelConfig:
        arch = Arch(data["arch"])
        dilations = tuple(int(d) for d in data["dilations"])
        if arch != Arch.DILATED_RESNET:
            dilations = (1,) * len(dilations)
        return cls(
            arch=arch,
            input_size=tuple(int(v) for v in (input_size or data.get("input_size", (224, 224)))),  # type: ignore
            in_channels=int(data.get("in_channels", 3)),
            widths=tuple(int(w) for w in data["widths"]),
            blocks=tuple(int(b) for b in data["blocks"]),
            dilations=dilations,
            num_classes=int(data.get("num_classes", NUM_CLASSES)),
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "arch": self.arch.value,
            "input_size": list(self.input_size),
            "in_channels": self.in_channels,
            "widths": list(self.widths),
            "blocks": list(self.blocks),
            "dilations": list(self.dilations),
            "num_classes": self.num_classes,
        }


class Classifier:
    """
    A feature extractor followed by a head, trained through explicit backward passes.

    Attributes:
        config: Architecture the network was built from
        seed: Initialization seed
        stem: Layers before the first stage (may be empty)
        stages: Feature stages in order
        head: Pooling/flattening and the fully connected layers
    """

    def __init__(self, config: ModelConfig, seed: int, stem: Sequential, stages: list[Layer], head: Sequential) -> None:
        self.config = config
        self.seed = seed
        self.stem = stem
        self.stages = stages
        self.head = head
        self._loss_grad: Array | None = None

    @property
    def layers(self) -> list[Layer]:
        return [self.stem, *self.stages, self.head]

    def parameters(self) -> list[Tensor]:
        return [tensor for layer in self.layers for tensor in layer.parameters()]

    def buffers(self) -> list[Tensor]:
        return [tensor for layer in self.layers for tensor in layer.buffers()]

    def tensors(self) -> list[Tensor]:
        """Parameters then buffers, in declaration order; the checkpoint layout."""
        return self.parameters() + self.buffers()

    @property
    def dtype(self) -> np.dtype[Any]:
        return self.parameters()[0].data.dtype

    @property
    def parameter_count(self) -> int:
        return sum(tensor.size for tensor in self.parameters())

    def zero_grad(self) -> None:
        for tensor in self.parameters():
            tensor.zero_grad()

    def forward(self, x: Array, training: bool = False) -> Array:
        expected = (self.config.in_channels, *self.config.input_size)
        if self.config.arch == Arch.ALEXNET_BASELINE and tuple(x.shape[1:]) != expected:
            msg = f"alexnet_baseline was built for inputs {expected}, got {tuple(x.shape[1:])}"
            raise ShapeMismatch(msg)
        x = np.asarray(x, dtype=self.dtype)
        for layer in self.layers:
            x = layer.forward(x, training)
        return x

    def backward(self, grad: Array | None = None) -> Array:
        """Backpropagate grad (default: the gradient of the last forward_loss) into every parameter."""
        if grad is None:
            if self._loss_grad is None:
                msg = "backward() without a gradient needs a preceding forward_loss()"
                raise ShapeMismatch(msg)
            grad, self._loss_grad = self._loss_grad, None
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def forward_loss(self, images: Array, labels: npt.ArrayLike, training: bool = True) -> tuple[float, Array]:
        """Mean softmax cross-entropy and the logits; the loss gradient is kept for backward()."""
        logits = self.forward(images, training)
        loss, grad = softmax_cross_entropy(logits, labels)
        self._loss_grad = grad.astype(self.dtype, copy=False)
        return loss, logits

    def stage_outputs(self, x: Array) -> list[Array]:
        """Feature maps after the stem and after every stage, in eval mode."""
        outputs = [self.stem.forward(np.asarray(x, dtype=self.dtype))]
        for stage in self.stages:
            outputs.append(stage.forward(outputs[-1]))
        return outputs

    def predict_proba(self, x: Array, batch_size: int = 64) -> Array:
        """Eval-mode class probabilities, batch by batch."""
        chunks = [softmax(self.forward(x[start : start + batch_size])) for start in range(0, len(x), batch_size)]
        return np.concatenate(chunks) if chunks else np.zeros((0, self.config.num_classes))

    def state(self) -> list[Array]:
        return [tensor.data.copy() for tensor in self.tensors()]

    def load_state(self, state: Sequence[Array]) -> None:
        tensors = self.tensors()
        if len(state) != len(tensors):
            msg = f"State has {len(state)} tensors, model has {len(tensors)}"
            raise ShapeMismatch(msg)
        for tensor, values in zip(tensors, state):
            tensor.assign(values)


_Parts = tuple[Sequence[Layer], list[Layer], Sequence[Layer]]


def _residual_network(
    cfg: ModelConfig, rng: np.random.Generator, dtype: npt.DTypeLike, stage_strides: Sequence[int]
) -> _Parts:
    first = cfg.widths[0]
    stem = [
        Conv2d("stem.conv", cfg.in_channels, first, 3, 1, 1, 1, False, rng, dtype),
        BatchNorm2d("stem.bn", first, dtype=dtype),
        ReLU("stem.relu"),
    ]
    stages: list[Layer] = []
    channels = first
    for index, (width, count, dilation, stride) in enumerate(zip(cfg.widths, cfg.blocks, cfg.dilations, stage_strides)):
        blocks: list[Layer] = []
        for block in range(count):
            blocks.append(
                ResidualBlock(
                    f"stage{index + 1}.block{block + 1}",
                    channels,
                    width,
                    stride if block == 0 else 1,
                    dilation,
                    rng,
                    dtype,
                )
            )
            channels = width
        stages.append(Sequential(f"stage{index + 1}", blocks))
    head = [GlobalAvgPool2d("head.pool"), Linear("head.fc", channels, cfg.num_classes, rng, dtype)]
    return stem, stages, head


def _alexnet(cfg: ModelConfig, rng: np.random.Generator, dtype: npt.DTypeLike) -> _Parts:
    w1, w2, w3 = cfg.widths[:3]
    features: list[Layer] = [
        Sequential(
            "block1",
            [Conv2d("conv1", cfg.in_channels, w1, 5, 2, 2, 1, True, rng, dtype), ReLU("relu1"), MaxPool2d("pool1")],
        ),
        Sequential(
            "block2",
            [Conv2d("conv2", w1, w2, 3, 1, 1, 1, True, rng, dtype), ReLU("relu2"), MaxPool2d("pool2")],
        ),
        Sequential(
            "block3",
            [
                Conv2d("conv3", w2, w3, 3, 1, 1, 1, True, rng, dtype),
                ReLU("relu3"),
                Conv2d("conv4", w3, w3, 3, 1, 1, 1, True, rng, dtype),
                ReLU("relu4"),
                Conv2d("conv5", w3, w2, 3, 1, 1, 1, True, rng, dtype),
                ReLU("relu5"),
                MaxPool2d("pool3"),
            ],
        ),
    ]
    height, width = (side // _ALEXNET_DOWNSAMPLING for side in cfg.input_size)
    hidden = 2 * w3
    head = [
        Flatten("head.flatten"),
        Linear("head.fc1", w2 * height * width, hidden, rng, dtype),
        ReLU("head.relu"),
        Linear("head.fc2", hidden, cfg.num_classes, rng, dtype),
    ]
    return [], features, head


def build_model(cfg: ModelConfig, init_seed: int, dtype: npt.DTypeLike = np.float32) -> Classifier:
    """
    Build a freshly initialized classifier: He fan-in normal weights, zero biases,
    batch-norm gamma 1 and beta 0, all drawn from one generator seeded by init_seed.
    """
    rng = np.random.default_rng(init_seed)
    match cfg.arch:
        case Arch.DILATED_RESNET:
            stem, stages, head = _residual_network(cfg, rng, dtype, [2] + [1] * (len(cfg.widths) - 1))
        case Arch.RESNET_BASELINE:
            stem, stages, head = _residual_network(cfg, rng, dtype, [2] * len(cfg.widths))
        case Arch.ALEXNET_BASELINE:
            stem, stages, head = _alexnet(cfg, rng, dtype)
        case _:
            msg = f"Unknown architecture {cfg.arch}"
            raise InvalidConfig(msg)
    model = Classifier(cfg, init_seed, Sequential("stem", stem), stages, Sequential("head", head))
    logger.debug("Built %s with %d trainable parameters", cfg.arch.value, model.parameter_count)
    return model


def parameter_count(cfg: ModelConfig) -> int:
    return build_model(cfg, 0).parameter_count
