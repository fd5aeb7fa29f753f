"""Column tables with deterministic CSV / flat-JSON serialization."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np


def _plain(v):
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, (np.floating, float)):
        return float(v)
    return v


def _fmt(v) -> str:
    v = _plain(v)
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return ""
    return str(v)


@dataclass
class Table:
    """Ordered columns of equal length."""

    columns: dict[str, list] = field(default_factory=dict)

    @classmethod
    def from_rows(cls, rows: list[dict], columns: list[str] | None = None) -> "Table":
        names = columns or (list(rows[0]) if rows else [])
        return cls({c: [r[c] for r in rows] for c in names})

    def __len__(self) -> int:
        return len(next(iter(self.columns.values()), []))

    def rows(self) -> list[dict]:
        names = list(self.columns)
        return [{c: _plain(self.columns[c][i]) for c in names} for i in range(len(self))]

    def column(self, name: str) -> np.ndarray:
        return np.asarray(self.columns[name])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(list(self.columns))
        for row in self.rows():
            w.writerow([_fmt(v) for v in row.values()])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(self.rows(), indent=1, allow_nan=True) + "\n"
