"""CSV reading for the laboratory's batch outputs.

Files carry `#`-prefixed metadata lines, one header row and numeric
columns.  Missing files, empty tables and absent columns all fail loudly.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np


class InputError(Exception):
    """Missing or malformed input data."""


class Table:
    def __init__(self, columns: dict, meta: dict, path: Path):
        self.columns = columns
        self.meta = meta
        self.path = path

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self.columns[name]
        except KeyError:
            raise InputError(
                f"{self.path}: required column {name!r} missing "
                f"(has {sorted(self.columns)})"
            ) from None

    def require(self, *names: str) -> None:
        for name in names:
            self[name]


def read_table(path: Path | str) -> Table:
    path = Path(path)
    if not path.exists():
        raise InputError(f"input file not found: {path}")
    meta: dict = {}
    header = None
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if "=" in line:
                    key, _, val = line[1:].partition("=")
                    meta[key.strip()] = val.strip()
                continue
            if header is None:
                header = [c.strip() for c in line.split(",")]
                continue
            try:
                rows.append([float(x) for x in line.split(",")])
            except ValueError as exc:
                raise InputError(f"{path}: malformed row {line!r}") from exc
    if header is None:
        raise InputError(f"{path}: no header row")
    if not rows:
        raise InputError(f"{path}: table is empty")
    data = np.asarray(rows, dtype=float)
    if data.shape[1] != len(header):
        raise InputError(f"{path}: ragged rows")
    return Table(
        {name: data[:, i] for i, name in enumerate(header)}, meta, path
    )
