"""Time-series CSV and binary field snapshots.

Snapshot layout: 4-byte magic ``CFSF``, then little-endian ``u32`` version,
``u32`` n and ``u32`` N, then ``N^(2n)`` little-endian float64 values in
C (row-major) order of the axes ``(x_1, y_1, ..., x_n, y_n)``.
"""

import json
import struct
from pathlib import Path

import numpy as np

from .diagnostics import CSV_FIELDS, DiagnosticsRecord

MAGIC = b"CFSF"
VERSION = 1
_HEADER = struct.Struct("<4sIII")


def write_snapshot(path, field, n):
    field = np.ascontiguousarray(field, dtype="<f8")
    N = field.shape[0]
    if field.shape != (N,) * (2 * n):
        raise ValueError(f"field of shape {field.shape} is not an n={n} grid field")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, n, N))
        fh.write(field.tobytes(order="C"))


def read_snapshot(path):
    """Return ``(n, N, field)``."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated snapshot header")
    magic, version, n, N = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise ValueError(f"{path}: unsupported snapshot version {version}")
    if n not in (1, 2):
        raise ValueError(f"{path}: bad dimension n={n}")
    count = N ** (2 * n)
    body = raw[_HEADER.size:]
    if len(body) != 8 * count:
        raise ValueError(f"{path}: expected {8 * count} data bytes, found {len(body)}")
    data = np.frombuffer(body, dtype="<f8").reshape((N,) * (2 * n)).astype(float)
    return n, N, data


def format_row(values):
    return ",".join("%.17g" % v for v in values)


class SeriesWriter:
    """Streams records to CSV, flushing after every row."""

    def __init__(self, path):
        self._fh = open(path, "w", newline="\n")
        self._fh.write(",".join(CSV_FIELDS) + "\n")
        self._fh.flush()

    def __call__(self, rec):
        self._fh.write(format_row(rec.as_row()) + "\n")
        self._fh.flush()

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_series(path):
    """Parse a series CSV back into :class:`DiagnosticsRecord` objects."""
    lines = Path(path).read_text().splitlines()
    if not lines or tuple(lines[0].split(",")) != CSV_FIELDS:
        raise ValueError(f"{path}: unexpected header")
    return [DiagnosticsRecord(*map(float, ln.split(","))) for ln in lines[1:] if ln]


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
