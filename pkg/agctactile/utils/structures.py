"""
Data structure and serialization utilities.

Helper functions shared by every stage that writes artifacts:
- Conversion of numpy values and dataclasses into JSON-ready structures
- Canonical JSON encoding so reruns produce byte-identical files
- Stable seed derivation from a master seed and labels
"""

from __future__ import annotations

from typing import Any
from enum import Enum
from pathlib import Path
import dataclasses
import hashlib
import json

from canonicaljson import encode_canonical_json
import numpy as np

json_decoder = json.JSONDecoder()


def to_jsonable(data: Any) -> Any:
    """
    Recursively convert numpy scalars/arrays, enums, tuples and dataclasses to plain JSON types.

    Non-finite floats become None, canonical JSON does not allow them.
    """
    if dataclasses.is_dataclass(data) and not isinstance(data, type):
        return {field.name: to_jsonable(getattr(data, field.name)) for field in dataclasses.fields(data)}
    if isinstance(data, Enum):
        return data.value
    if isinstance(data, dict):
        return {str(key): to_jsonable(value) for key, value in data.items()}
    if isinstance(data, (list, tuple)):
        return [to_jsonable(value) for value in data]
    if isinstance(data, np.ndarray):
        return to_jsonable(data.tolist())
    if isinstance(data, (bool, np.bool_)):
        return bool(data)
    if isinstance(data, (int, np.integer)):
        return int(data)
    if isinstance(data, (float, np.floating)):
        value = float(data)
        return value if np.isfinite(value) else None
    return data


def canonical_dumps(data: Any) -> bytes:
    """Encode as canonical JSON (sorted keys, no whitespace, UTF-8)."""
    return encode_canonical_json(to_jsonable(data))


def write_json(path: Path, data: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(canonical_dumps(data))


def read_json(path: Path) -> Any:
    return json_decoder.decode(path.read_text(encoding="utf-8"))


def full_dict_copy(data_to_copy: dict[str, Any]) -> dict[str, Any]:
    """
    Make a deep copy of a dictionary to avoid mutating any sub-keys.

    Returns:
        New dictionary with all nested structures copied
    """
    return json_decoder.decode(json.dumps(to_jsonable(data_to_copy)))


def derive_seed(master_seed: int, *labels: str | int) -> int:
    """
    Derive a stable 64-bit seed from a master seed and a label path.

    The 8-byte BLAKE2b digest of the canonical JSON of [master_seed, *labels],
    read little-endian. Independent of platform, process and hash randomization.
    """
    digest = hashlib.blake2b(encode_canonical_json([master_seed, *labels]), digest_size=8).digest()
    return int.from_bytes(digest, "little")
