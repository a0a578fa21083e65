"""Matrix files: comma-separated text, or the ``AGW1`` binary layout
(magic, u64 rows, u64 cols, row-major little-endian float64 payload)."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"AGW1"
_HEADER = struct.Struct("<4sQQ")


class MatrixFileError(ValueError):
    pass


def read_matrix(path, skip_header: bool = False) -> np.ndarray:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise MatrixFileError(f"{path}: {exc.strerror}") from None
    if raw[:4] == MAGIC:
        return _read_binary(path, raw)
    return _read_text(path, raw, skip_header)


def _read_binary(path, raw):
    if len(raw) < _HEADER.size:
        raise MatrixFileError(f"{path}: truncated header")
    _, rows, cols = _HEADER.unpack_from(raw)
    expected = _HEADER.size + 8 * rows * cols
    if len(raw) != expected:
        raise MatrixFileError(f"{path}: header declares {rows} x {cols} values "
                              f"({expected} bytes) but file has {len(raw)} bytes")
    values = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).astype(np.float64)
    if not np.all(np.isfinite(values)):
        raise MatrixFileError(f"{path}: non-finite values in payload")
    return values.reshape(rows, cols)


def _read_text(path, raw, skip_header):
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError:
        raise MatrixFileError(f"{path}: not UTF-8 text and no AGW1 magic") from None
    rows = []
    width = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        if skip_header and lineno == 1:
            continue
        if not line.strip():
            continue
        fields = line.split(",")
        if width is None:
            width = len(fields)
        elif len(fields) != width:
            raise MatrixFileError(f"{path}: line {lineno}: expected {width} columns, "
                                  f"found {len(fields)}")
        row = []
        for col, field in enumerate(fields, start=1):
            try:
                value = float(field)
            except ValueError:
                raise MatrixFileError(f"{path}: line {lineno}, column {col}: "
                                      f"cannot parse {field.strip()!r} as a number") from None
            if not np.isfinite(value):
                raise MatrixFileError(f"{path}: line {lineno}, column {col}: non-finite value")
            row.append(value)
        rows.append(row)
    if not rows:
        raise MatrixFileError(f"{path}: no data rows")
    return np.array(rows, dtype=np.float64)


def write_matrix(path, M, binary=None) -> None:
    """Write ``M``; binary when ``binary`` is true or the suffix is ``.bin``."""
    path = Path(path)
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    if binary is None:
        binary = path.suffix == ".bin"
    if binary:
        payload = np.ascontiguousarray(M, dtype="<f8").tobytes()
        path.write_bytes(_HEADER.pack(MAGIC, M.shape[0], M.shape[1]) + payload)
    else:
        lines = (",".join(format(v, ".17g") for v in row) for row in M)
        path.write_text("\n".join(lines) + "\n")


def read_vector(path) -> np.ndarray:
    """A single row or single column matrix file, flattened."""
    M = read_matrix(path)
    if 1 not in M.shape:
        raise MatrixFileError(f"{path}: expected a vector, got a {M.shape[0]} x {M.shape[1]} matrix")
    return M.ravel()
