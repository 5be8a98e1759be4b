"""
Utility functions and classes for the tactile pipeline.

- Aligned plain-text tables
- Half-up rounding into bytes
- Serialization and seed derivation helpers
- Duration formatting
"""

from .display import Justify, TableColumn, render_table
from .numbers import to_bytes_half_up
from .structures import canonical_dumps, derive_seed, full_dict_copy, read_json, to_jsonable, write_json
from .time import pretty_print_duration

__all__ = [
    "Justify",
    "TableColumn",
    "canonical_dumps",
    "derive_seed",
    "full_dict_copy",
    "pretty_print_duration",
    "read_json",
    "render_table",
    "to_bytes_half_up",
    "to_jsonable",
    "write_json",
]
