"""
Checkpoint files: one line of canonical JSON, a newline, then every tensor of the model
(parameters, then batch-norm running statistics, in declaration order) as little-endian
float32.
"""

from __future__ import annotations

from typing import Any
from dataclasses import dataclass, field
from pathlib import Path
import json
import logging

import numpy as np

from agctactile.augment import Standardizer
from agctactile.errors import MissingCheckpoint, ShapeMismatch
from agctactile.nn.models import Classifier, ModelConfig, build_model
from agctactile.utils import canonical_dumps

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "agctactile-checkpoint/1"
_BLOB_DTYPE = np.dtype("<f4")


@dataclass(slots=True)
class Checkpoint:
    model_config: ModelConfig
    seed: int
    epoch: int
    tensors: list[dict[str, Any]]
    standardizer: Standardizer | None = None
    extra: dict[str, Any] = field(default_factory=dict)

    def header(self) -> dict[str, Any]:
        return {
            "format": CHECKPOINT_FORMAT,
            "config": self.model_config.to_dict(),
            "seed": self.seed,
            "epoch": self.epoch,
            "tensors": self.tensors,
            "standardizer": None if self.standardizer is None else self.standardizer.to_dict(),
            "extra": self.extra,
        }


def save_checkpoint(
    path: Path,
    model: Classifier,
    epoch: int,
    standardizer: Standardizer | None = None,
    extra: dict[str, Any] | None = None,
) -> Path:
    tensors = model.tensors()
    checkpoint = Checkpoint(
        model_config=model.config,
        seed=model.seed,
        epoch=epoch,
        tensors=[{"name": tensor.name, "shape": list(tensor.shape)} for tensor in tensors],
        standardizer=standardizer,
        extra=extra or {},
    )
    blob = b"".join(np.ascontiguousarray(tensor.data, dtype=_BLOB_DTYPE).tobytes() for tensor in tensors)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(canonical_dumps(checkpoint.header()) + b"\n" + blob)
    logger.debug("Saved %d tensors (%d bytes) to %s", len(tensors), len(blob), path)
    return path


def read_checkpoint(path: Path) -> tuple[Checkpoint, bytes]:
    if not path.is_file():
        msg = f"No checkpoint at {path}"
        raise MissingCheckpoint(msg)
    raw = path.read_bytes()
    header_bytes, _, blob = raw.partition(b"\n")
    header = json.loads(header_bytes)
    if header.get("format") != CHECKPOINT_FORMAT:
        msg = f"{path} is not a checkpoint"
        raise MissingCheckpoint(msg, f"format: {header.get('format')}")
    standardizer = header.get("standardizer")
    checkpoint = Checkpoint(
        model_config=ModelConfig.from_mapping(header["config"]),
        seed=int(header["seed"]),
        epoch=int(header["epoch"]),
        tensors=header["tensors"],
        standardizer=None if standardizer is None else Standardizer.from_dict(standardizer),
        extra=header.get("extra", {}),
    )
    return checkpoint, blob


def load_checkpoint(path: Path) -> tuple[Classifier, Checkpoint]:
    """
    Rebuild the model a checkpoint was saved from and load its tensors.

    Raises:
        MissingCheckpoint: the file does not exist or is not a checkpoint
        ShapeMismatch: the blob does not match the tensor layout in the header
    """
    checkpoint, blob = read_checkpoint(path)
    model = build_model(checkpoint.model_config, checkpoint.seed)
    tensors = model.tensors()
    expected = sum(int(np.prod(entry["shape"])) for entry in checkpoint.tensors)
    if len(tensors) != len(checkpoint.tensors) or len(blob) != expected * _BLOB_DTYPE.itemsize:
        msg = f"Checkpoint {path} does not match its own header"
        detail = f"{len(tensors)} model tensors, {len(checkpoint.tensors)} in header, {len(blob)} bytes"
        raise ShapeMismatch(msg, detail)
    values = np.frombuffer(blob, dtype=_BLOB_DTYPE)
    offset = 0
    for tensor, entry in zip(tensors, checkpoint.tensors):
        if tensor.name != entry["name"] or list(tensor.shape) != list(entry["shape"]):
            msg = f"Checkpoint tensor {entry['name']} {entry['shape']} does not fit {tensor.name} {tensor.shape}"
            raise ShapeMismatch(msg)
        tensor.assign(values[offset : offset + tensor.size].reshape(tensor.shape))
        offset += tensor.size
    return model, checkpoint
