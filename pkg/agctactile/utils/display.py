"""
Plain-text tables for stage summaries.

The report stage prints its architecture comparison through render_table: a header row,
a dash rule, then one line per row, with every column sized to its widest cell.
"""

from __future__ import annotations

from typing import Sequence
from dataclasses import dataclass
from enum import Enum


class Justify(Enum):
    RIGHT = "right"
    LEFT = "left"


@dataclass(slots=True)
class TableColumn:
    """One column of a text table; width grows to fit the widest cell seen."""

    header: str
    justify: Justify = Justify.LEFT
    width: int = 0

    def __post_init__(self) -> None:
        self.width = max(self.width, len(self.header))

    def fit(self, cell: str) -> None:
        self.width = max(self.width, len(cell))

    def format(self, cell: str | None = None) -> str:
        text = self.header if cell is None else cell
        if self.justify is Justify.RIGHT:
            return text.rjust(self.width)
        return text.ljust(self.width)


def render_table(headers: Sequence[str], rows: Sequence[Sequence[str]], separator: str = " | ") -> str:
    """
    Render rows of strings as an aligned text table.

    The first column is left justified and the rest right justified, which suits a name
    column followed by numbers.
    """
    columns = [
        TableColumn(header, Justify.LEFT if index == 0 else Justify.RIGHT) for index, header in enumerate(headers)
    ]
    for row in rows:
        for column, cell in zip(columns, row, strict=True):
            column.fit(cell)

    header_line = separator.join(column.format() for column in columns)
    lines = [header_line, "-" * len(header_line)]
    lines.extend(separator.join(column.format(cell) for column, cell in zip(columns, row, strict=True)) for row in rows)
    return "\n".join(lines) + "\n"
