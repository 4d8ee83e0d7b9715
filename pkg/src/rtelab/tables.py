"""Result tables and their CSV form.

Header lines start with ``#`` and echo the configuration; data rows never
carry wall-clock content, so identical configurations give identical files.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path


def fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


@dataclass
class Table:
    name: str
    columns: list[str]
    rows: list[list] = field(default_factory=list)
    header: dict[str, str] = field(default_factory=dict)
    footer: dict[str, str] = field(default_factory=dict)

    def add(self, *values) -> None:
        if len(values) != len(self.columns):
            raise ValueError(f"row has {len(values)} values, table {self.name} has {len(self.columns)} columns")
        self.rows.append(list(values))

    def column(self, name: str) -> list:
        k = self.columns.index(name)
        return [r[k] for r in self.rows]

    def where(self, name: str, value) -> "Table":
        k = self.columns.index(name)
        return Table(self.name, self.columns, [r for r in self.rows if r[k] == value], self.header, self.footer)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# table: {self.name}\n")
        for key, val in self.header.items():
            buf.write(f"# {key}: {val}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([fmt(v) for v in r])
        if self.footer:
            buf.write("#fit," + ",".join(f"{k}={fmt(v)}" for k, v in self.footer.items()) + "\n")
        return buf.getvalue()

    def write(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_csv())
        return path


def read_csv(text_or_path) -> Table:
    """Parse a table written by :meth:`Table.to_csv` (numbers come back as floats)."""
    text = Path(text_or_path).read_text() if isinstance(text_or_path, Path) else text_or_path
    header, footer, body = {}, {}, []
    name = ""
    for line in text.splitlines():
        if line.startswith("#fit,"):
            for item in line[5:].split(","):
                k, _, v = item.partition("=")
                footer[k] = _parse(v)
        elif line.startswith("#"):
            k, _, v = line[1:].strip().partition(": ")
            if k == "table":
                name = v
            else:
                header[k] = v
        elif line:
            body.append(line)
    rows = list(csv.reader(body))
    t = Table(name, rows[0], header=header, footer=footer)
    t.rows = [[_parse(v) for v in r] for r in rows[1:]]
    return t


def _parse(v: str):
    if v in ("true", "false"):
        return v == "true"
    try:
        return float(v)
    except ValueError:
        return v
