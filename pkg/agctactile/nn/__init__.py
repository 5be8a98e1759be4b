"""
Numpy classifiers with hand-written backward passes.

- Layers: dilated convolution, batch norm, pooling, linear and residual blocks
- Models: desk-scale Dilated ResNet plus ResNet-style and AlexNet-style baselines
- Checkpoints: JSON header followed by a little-endian float32 parameter blob
"""

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .layers import (
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
from .models import Classifier, ModelConfig, build_model, parameter_count
from .tensor import Tensor

__all__ = [
    "BatchNorm2d",
    "Checkpoint",
    "Classifier",
    "Conv2d",
    "Flatten",
    "GlobalAvgPool2d",
    "Layer",
    "Linear",
    "MaxPool2d",
    "ModelConfig",
    "ReLU",
    "ResidualBlock",
    "Sequential",
    "Tensor",
    "build_model",
    "load_checkpoint",
    "parameter_count",
    "save_checkpoint",
    "softmax",
    "softmax_cross_entropy",
]
