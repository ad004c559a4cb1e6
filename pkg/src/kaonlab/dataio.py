"""CSV reading and writing for asymmetry datasets and result tables."""

from __future__ import annotations

import csv
import io
import math
import os
from typing import Iterable, Sequence, TextIO

import numpy as np

from .decoherence import AsymmetryDataset
from .errors import DataFormatError

__all__ = ["DATASET_COLUMNS", "ingest_csv", "read_dataset", "write_dataset", "write_table", "format_number"]

DATASET_COLUMNS = ("t_l", "t_r", "asym", "sigma")


def format_number(v) -> str:
    """Shortest round-trip text for a number."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def read_dataset(stream: TextIO, source: str = "<stream>") -> AsymmetryDataset:
    """Parse ``t_l,t_r,asym,sigma`` CSV text.

    Raises
    ------
    DataFormatError
        With the 1-based line number for row-level problems and the
        column name for schema problems.
    """
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise DataFormatError("empty file, expected header t_l,t_r,asym,sigma", line=1) from None
    header = [h.strip() for h in header]
    for col in DATASET_COLUMNS:
        if col not in header:
            raise DataFormatError(f"missing column {col!r}", line=1, column=col)
    for col in header:
        if col not in DATASET_COLUMNS:
            raise DataFormatError(f"unknown column {col!r}", line=1, column=col)
    if len(set(header)) != len(header):
        raise DataFormatError("duplicate column in header", line=1)
    pos = {c: header.index(c) for c in DATASET_COLUMNS}

    rows = []
    for row in reader:
        line = reader.line_num
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise DataFormatError(f"expected {len(header)} fields, got {len(row)}", line=line)
        values = {}
        for col, i in pos.items():
            text = row[i].strip()
            try:
                v = float(text)
            except ValueError:
                raise DataFormatError(f"{col} is not a number: {text!r}", line=line, column=col) from None
            if not math.isfinite(v):
                raise DataFormatError(f"{col} must be finite", line=line, column=col)
            values[col] = v
        if values["sigma"] <= 0:
            raise DataFormatError(f"sigma must be > 0, got {values['sigma']!r}", line=line, column="sigma")
        for col in ("t_l", "t_r"):
            if values[col] < 0:
                raise DataFormatError(f"{col} must be >= 0", line=line, column=col)
        rows.append([values[c] for c in DATASET_COLUMNS])
    if not rows:
        raise DataFormatError("no data rows")
    arr = np.array(rows)
    return AsymmetryDataset(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], source)


def ingest_csv(path: str | os.PathLike) -> AsymmetryDataset:
    """Read and validate an asymmetry dataset file."""
    with open(path, newline="", encoding="utf-8") as fh:
        return read_dataset(fh, os.path.basename(os.fspath(path)))


def write_table(stream: TextIO, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    """Write a CSV table with deterministic number formatting."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_number(v) for v in row])


def write_dataset(stream: TextIO, data: AsymmetryDataset) -> None:
    write_table(stream, DATASET_COLUMNS, zip(data.t_l, data.t_r, data.asym, data.sigma))


def dataset_to_text(data: AsymmetryDataset) -> str:
    buf = io.StringIO()
    write_dataset(buf, data)
    return buf.getvalue()
