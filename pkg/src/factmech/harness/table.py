"""Result tables with exact CSV round-tripping.

Floats are serialized with repr(), which Python guarantees to round-trip
bit-exactly, so re-parsing an emitted CSV reproduces the table. Metadata
rides along as leading '# key: value' comment lines.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import ValidationError


@dataclass
class ResultTable:
    columns: tuple[str, ...]
    rows: list[tuple[float, ...]]
    metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if len(set(self.columns)) != len(self.columns) or not self.columns:
            raise ValidationError(f"column names must be nonempty and unique, "
                                  f"got {self.columns!r}")
        for name in self.columns:
            if not name or any(ch in name for ch in ",\n\r#"):
                raise ValidationError(f"bad column name {name!r}")
        self.rows = [tuple(float(v) for v in row) for row in self.rows]
        for row in self.rows:
            if len(row) != len(self.columns):
                raise ValidationError(
                    f"row of width {len(row)} in a {len(self.columns)}-column table")

    def column(self, name: str) -> list[float]:
        idx = self.columns.index(name)
        return [row[idx] for row in self.rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        for key in sorted(self.metadata):
            buf.write(f"# {key}: {self.metadata[key]}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([repr(v) for v in row])
        return buf.getvalue()

    def write_csv(self, path: str | Path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv())

    @classmethod
    def from_csv(cls, text: str) -> "ResultTable":
        metadata: dict[str, str] = {}
        lines = text.splitlines()
        body_start = 0
        for i, line in enumerate(lines):
            if not line.startswith("#"):
                body_start = i
                break
            key, _, value = line[1:].partition(":")
            metadata[key.strip()] = value.strip()
        else:
            raise ValidationError("CSV has no header row")
        reader = csv.reader(lines[body_start:])
        header = next(reader, None)
        if not header:
            raise ValidationError("CSV has no header row")
        rows = [tuple(float(v) for v in row) for row in reader if row]
        return cls(columns=tuple(header), rows=rows, metadata=metadata)

    @classmethod
    def read_csv(cls, path: str | Path) -> "ResultTable":
        with open(path, "r", encoding="utf-8", newline="") as fh:
            return cls.from_csv(fh.read())
