"""CSV and plain-text report writers with a fixed number format."""

from __future__ import annotations

import csv
import hashlib
import io
import math
from collections.abc import Iterable, Mapping, Sequence

import numpy as np

SIG_DIGITS = 15


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "pass" if value else "fail"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if v == 0.0:
            return "0"
        return format(v, f".{SIG_DIGITS}g")
    return str(value)


def csv_text(columns: Sequence[str], rows: Iterable[Mapping]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(row[c]) for c in columns])
    return buf.getvalue()


def write_csv(path, columns: Sequence[str], rows: Iterable[Mapping]) -> None:
    """Header row first; an empty ``rows`` produces a header-only file."""
    with open(path, "w", newline="") as fh:
        fh.write(csv_text(columns, rows))


def write_text(path, lines: Iterable[str]) -> None:
    with open(path, "w") as fh:
        for line in lines:
            fh.write(line.rstrip("\n") + "\n")


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


STABILITY_COLUMNS = ("n", "epsilon", "p_hat", "ci_lo", "ci_hi", "mean_sup")
DENSITY_COLUMNS = ("y", "p_hat", "oracle_p", "bound_envelope")
LATTICE_COLUMNS = ("trial", "r1", "r2", "rmin", "rmax", "verdict")
PROBE_COLUMNS = ("level", "coarse_n", "fine_n", "median", "q1", "q3", "mean")
