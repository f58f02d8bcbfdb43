"""CSV input and output helpers.

Input series are one value per line with an optional non-numeric header;
extra comma-separated columns are ignored (the first column is read). All
numbers are written with 17 significant digits so that they round-trip.
"""
import csv
import io as _io
import math

import numpy as np

from .errors import DataError

FLOAT_FMT = "%.17g"


def fmt(x):
    """Round-trip-exact text for a float (``nan`` for missing values)."""
    if x is None:
        return "nan"
    return FLOAT_FMT % x


def read_series(path_or_stream):
    """Read a finite real series from a CSV file.

    Raises
    ------
    DataError
        On unparseable or non-finite entries (with the line number), or when
        no value is found.
    """
    if hasattr(path_or_stream, "read"):
        text = path_or_stream.read()
    else:
        try:
            with open(path_or_stream, newline="") as fh:
                text = fh.read()
        except OSError as exc:
            raise DataError(f"cannot read {path_or_stream}: {exc}") from exc
    values = []
    seen_row = False
    for lineno, row in enumerate(csv.reader(_io.StringIO(text)), start=1):
        if not row or not row[0].strip():
            continue
        cell = row[0].strip()
        first_row = not seen_row
        seen_row = True
        try:
            x = float(cell)
        except ValueError:
            if first_row:
                continue  # header
            raise DataError(f"line {lineno}: cannot parse {cell!r} as a number") from None
        if not math.isfinite(x):
            raise DataError(f"line {lineno}: non-finite value {cell!r}")
        values.append(x)
    if not values:
        raise DataError("input contains no numeric values")
    return np.asarray(values)


def write_rows(stream, header, rows):
    """Write a header and rows; floats are formatted with :func:`fmt`."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(c) if isinstance(c, (float, np.floating)) else c for c in row])
