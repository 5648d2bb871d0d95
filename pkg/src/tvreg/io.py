"""File formats: TVF1/TVM1 binaries, flat config files, CSV/JSON reports.

TVF1 field files: bytes 0-3 ASCII "TVF1"; little-endian u32 dim; dim u32
shape entries; dim f64 spacings; dim f64 origins; then shape-product f64
values, row-major.  No padding anywhere.  TVM1 matrix files: ASCII "TVM1";
u32 rows; u32 cols; rows*cols f64 entries row-major.

Configs are flat ``key = value`` lines with ``#`` comments and
comma-separated lists, so any language can parse them.  Reports are written
with stable key order and shortest-roundtrip float formatting so identical
runs produce byte-identical files.
"""

from __future__ import annotations

import csv
import json
import struct

import numpy as np

from .fields import Grid, ScalarField

__all__ = [
    "write_field_tvf",
    "read_field_tvf",
    "write_matrix_tvm",
    "read_matrix_tvm",
    "parse_config",
    "load_config",
    "format_number",
    "write_csv_report",
    "write_json_report",
]

_U32 = "<I"
_F64 = "<d"


def write_field_tvf(path, field: ScalarField) -> None:
    grid = field.grid
    with open(path, "wb") as fh:
        fh.write(b"TVF1")
        fh.write(struct.pack(_U32, grid.dim))
        for n in grid.shape:
            fh.write(struct.pack(_U32, n))
        for h in grid.spacing:
            fh.write(struct.pack(_F64, h))
        for o in grid.origin:
            fh.write(struct.pack(_F64, o))
        fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())


def read_field_tvf(path) -> ScalarField:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != b"TVF1":
            raise ValueError(f"{path}: bad magic {magic!r}, expected b'TVF1'")
        (dim,) = struct.unpack(_U32, fh.read(4))
        shape = struct.unpack(f"<{dim}I", fh.read(4 * dim))
        spacing = struct.unpack(f"<{dim}d", fh.read(8 * dim))
        origin = struct.unpack(f"<{dim}d", fh.read(8 * dim))
        grid = Grid(shape, spacing, origin)
        data = fh.read(8 * grid.npoints)
        if len(data) != 8 * grid.npoints:
            raise ValueError(f"{path}: truncated value payload")
        values = np.frombuffer(data, dtype="<f8").reshape(shape)
    return ScalarField(grid, values.astype(np.float64))


def write_matrix_tvm(path, matrix: np.ndarray) -> None:
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2:
        raise ValueError("matrix must be two-dimensional")
    rows, cols = matrix.shape
    with open(path, "wb") as fh:
        fh.write(b"TVM1")
        fh.write(struct.pack(_U32, rows))
        fh.write(struct.pack(_U32, cols))
        fh.write(np.ascontiguousarray(matrix, dtype="<f8").tobytes())


def read_matrix_tvm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != b"TVM1":
            raise ValueError(f"{path}: bad magic {magic!r}, expected b'TVM1'")
        rows, cols = struct.unpack("<2I", fh.read(8))
        data = fh.read(8 * rows * cols)
        if len(data) != 8 * rows * cols:
            raise ValueError(f"{path}: truncated matrix payload")
        return np.frombuffer(data, dtype="<f8").reshape(rows, cols).astype(np.float64)


def parse_config(text: str) -> dict:
    """Flat ``key = value`` lines; '#' starts a comment; values stay strings."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        out[key.strip()] = value.strip()
    return out


def load_config(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def format_number(x) -> str:
    """Shortest-roundtrip decimal for floats; plain str for ints/bools."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_csv_report(path, header, rows) -> None:
    """RFC-4180 CSV with LF line endings and '.' decimal separator."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                ["" if v is None else
                 format_number(v) if isinstance(v, (bool, int, float, np.bool_,
                                                    np.integer, np.floating))
                 else str(v)
                 for v in row]
            )


def _sanitize(obj):
    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def write_json_report(path, obj) -> None:
    """UTF-8 JSON with sorted keys; floats keep full precision."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_sanitize(obj), fh, sort_keys=True, indent=2)
        fh.write("\n")
