"""CSV reading and writing for signals and decomposition outputs.

The on-disk convention: a header row names the channels; an optional
leading column whose header is one of ``time``, ``t``, ``timestamp``,
``date``, ``index`` (case-insensitive) carries row labels that are
preserved verbatim through to outputs; empty cells and any spelling of
``nan`` mark unknown entries.  Floats are written with ``repr`` so the
round trip is exact and the bytes are deterministic.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .exceptions import DataError
from .signal import Signal

_TIME_NAMES = {"time", "t", "timestamp", "date", "index"}


@dataclass(frozen=True)
class Table:
    """A parsed CSV: the signal plus presentation details for round trips."""

    signal: Signal
    columns: tuple
    time: tuple | None = None
    time_name: str | None = None


def read_csv(path) -> Table:
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    rows = [row for row in rows if row]
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [cell.strip() for cell in rows[0]]
    if not header or all(cell == "" for cell in header):
        raise DataError(f"{path}: empty header row")
    has_time = header[0].lower() in _TIME_NAMES
    first_data = 1 if has_time else 0
    columns = tuple(header[first_data:])
    if not columns:
        raise DataError(f"{path}: no data columns")
    data = []
    times = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise DataError(
                f"{path}: line {lineno}: expected {len(header)} cells, got {len(row)}"
            )
        if has_time:
            times.append(row[0])
        parsed = []
        for name, cell in zip(columns, row[first_data:]):
            cell = cell.strip()
            if cell == "" or cell.lower() == "nan":
                parsed.append(np.nan)
                continue
            try:
                parsed.append(float(cell))
            except ValueError:
                raise DataError(
                    f"{path}: line {lineno}: column {name!r}: not a number: {cell!r}"
                ) from None
        data.append(parsed)
    if not data:
        raise DataError(f"{path}: no data rows")
    signal = Signal(np.array(data, dtype=float))
    return Table(
        signal=signal,
        columns=columns,
        time=tuple(times) if has_time else None,
        time_name=header[0] if has_time else None,
    )


def _format(x) -> str:
    if np.isnan(x):
        return ""
    return repr(float(x))


def write_matrix_csv(path, values, columns, time=None, time_name="t"):
    """Write a T x p matrix; NaN becomes an empty cell."""
    values = np.asarray(values, dtype=float)
    if values.ndim != 2 or values.shape[1] != len(columns):
        raise DataError(
            f"matrix shape {values.shape} does not match {len(columns)} columns"
        )
    if time is not None and len(time) != values.shape[0]:
        raise DataError(f"{len(time)} row labels for {values.shape[0]} rows")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if time is not None:
            writer.writerow([time_name, *columns])
            for label, row in zip(time, values):
                writer.writerow([label, *[_format(x) for x in row]])
        else:
            writer.writerow(list(columns))
            for row in values:
                writer.writerow([_format(x) for x in row])


def write_rows_csv(path, header, rows):
    """Write generic rows; floats formatted exactly, other cells verbatim."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(header))
        for row in rows:
            writer.writerow(
                [_format(c) if isinstance(c, float) else c for c in row]
            )
