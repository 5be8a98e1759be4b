"""
SGD with momentum, Adam and AdaBound over lists of Tensors.

Weight decay is folded into the gradient (g + wd * w) before any kind-specific update.
"""

from __future__ import annotations

from typing import Any, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt

from agctactile.constants import WEIGHT_DECAY_MAX
from agctactile.errors import InvalidConfig, NonFiniteGradient
from agctactile.nn.tensor import Tensor
from agctactile.types import OptimizerKind

Array = npt.NDArray[Any]


@dataclass(frozen=True, slots=True)
class OptimizerSpec:
    kind: OptimizerKind = OptimizerKind.SGD
    lr: float = 0.01
    weight_decay: float = 0.0
    momentum: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    final_lr: float = 0.1

    def __post_init__(self) -> None:
        # lr 0 is accepted so a run can be pinned to its initial weights
        if not 0 <= self.lr <= 1:
            msg = f"lr must be in [0, 1], got {self.lr}"
            raise InvalidConfig(msg)
        if not 0 <= self.weight_decay <= WEIGHT_DECAY_MAX:
            msg = f"weight_decay must be in [0, {WEIGHT_DECAY_MAX}], got {self.weight_decay}"
            raise InvalidConfig(msg)
        if not (0 <= self.momentum < 1 and 0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            msg = "momentum, beta1 and beta2 must be in [0, 1)"
            raise InvalidConfig(msg)
        if self.eps <= 0 or self.final_lr <= 0:
            msg = "eps and final_lr must be positive"
            raise InvalidConfig(msg)

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> OptimizerSpec:
        return cls(
            kind=OptimizerKind(data.get("kind", OptimizerKind.SGD.value)),
            lr=float(data.get("lr", 0.01)),
            weight_decay=float(data.get("weight_decay", 0.0)),
            momentum=float(data.get("momentum", 0.9)),
            beta1=float(data.get("beta1", 0.9)),
            beta2=float(data.get("beta2", 0.999)),
            eps=float(data.get("eps", 1e-8)),
            final_lr=float(data.get("final_lr", 0.1)),
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind.value,
            "lr": self.lr,
            "weight_decay": self.weight_decay,
            "momentum": self.momentum,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
            "final_lr": self.final_lr,
        }


@dataclass(slots=True)
class SlotState:
    """Per-parameter optimizer memory: momentum buffer or first/second moments."""

    first: Array
    second: Array | None = None


def adabound_bounds(final_lr: float, beta2: float, step: int) -> tuple[float, float]:
    """Clamp interval for AdaBound's per-coordinate step size at step t (1-based)."""
    gamma = 1.0 - beta2
    return final_lr * (1.0 - 1.0 / (gamma * step + 1.0)), final_lr * (1.0 + 1.0 / (gamma * step))


def optimizer_step(
    spec: OptimizerSpec, weight: Array, grad: Array, state: SlotState | None, step: int, lr: float
) -> tuple[Array, SlotState]:
    """
    One update of a single array; returns the new weights and optimizer state.

    step is the 1-based update count, used for bias correction and AdaBound's bounds.
    """
    grad = grad + spec.weight_decay * weight if spec.weight_decay else grad
    match spec.kind:
        case OptimizerKind.SGD:
            velocity = grad.copy() if state is None else spec.momentum * state.first + grad
            return weight - lr * velocity, SlotState(velocity)
        case OptimizerKind.ADAM | OptimizerKind.ADABOUND:
            first = (1 - spec.beta1) * grad if state is None else spec.beta1 * state.first + (1 - spec.beta1) * grad
            previous = np.zeros_like(grad) if state is None or state.second is None else state.second
            second = spec.beta2 * previous + (1 - spec.beta2) * grad * grad
            first_hat = first / (1 - spec.beta1**step)
            second_hat = second / (1 - spec.beta2**step)
            step_size = lr / (np.sqrt(second_hat) + spec.eps)
            if spec.kind == OptimizerKind.ADABOUND:
                step_size = np.clip(step_size, *adabound_bounds(spec.final_lr, spec.beta2, step))
            return weight - step_size * first_hat, SlotState(first, second)
    msg = f"Unknown optimizer {spec.kind}"
    raise InvalidConfig(msg)


@dataclass(slots=True)
class Optimizer:
    spec: OptimizerSpec
    parameters: Sequence[Tensor]
    step_count: int = 0
    slots: dict[str, SlotState] = field(default_factory=dict)

    def check_gradients(self) -> None:
        for tensor in self.parameters:
            if tensor.grad is not None and not np.all(np.isfinite(tensor.grad)):
                bad = int(np.count_nonzero(~np.isfinite(tensor.grad)))
                msg = f"Non-finite gradient in {tensor.name}"
                raise NonFiniteGradient(msg, f"{bad} of {tensor.size} entries, step {self.step_count + 1}")

    def step(self, lr: float) -> None:
        """Apply one update with the given learning rate to every parameter that has a gradient."""
        self.check_gradients()
        self.step_count += 1
        for tensor in self.parameters:
            if tensor.grad is None:
                continue
            weight, self.slots[tensor.name] = optimizer_step(
                self.spec, tensor.data, tensor.grad, self.slots.get(tensor.name), self.step_count, lr
            )
            tensor.data[...] = weight
