"""Tabular experiment output and its delimited serialization.

CSV bodies are fully deterministic: '.' decimal separator, no thousands
separators, LF line endings, and a fixed shortest-repr float format, so the
same (config, seed) pair always produces byte-identical files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


def format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


@dataclass
class ResultTable:
    """Rectangular numeric records plus run metadata."""

    columns: list
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(set(self.columns)) != len(self.columns):
            raise ValueError("column names must be unique")

    def append(self, record: dict):
        unknown = set(record) - set(self.columns)
        if unknown:
            raise ValueError(f"record has unknown columns {sorted(unknown)}")
        self.rows.append([record.get(c) for c in self.columns])

    def column(self, name: str) -> list:
        idx = self.columns.index(name)
        return [row[idx] for row in self.rows]

    def records(self) -> list:
        return [dict(zip(self.columns, row)) for row in self.rows]

    def to_csv(self) -> str:
        lines = [",".join(self.columns)]
        for row in self.rows:
            lines.append(",".join(format_cell(v) for v in row))
        return "\n".join(lines) + "\n"

    def write(self, csv_path, meta_path=None):
        with open(csv_path, "w", newline="") as fh:
            fh.write(self.to_csv())
        if meta_path is not None:
            with open(meta_path, "w") as fh:
                json.dump(self.metadata, fh, indent=2, sort_keys=True)
                fh.write("\n")
