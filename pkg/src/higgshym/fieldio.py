"""Flat binary serialization of scalar and matrix fields.

Layout (all little-endian)::

    b"HYMF"                  magic
    u32 version, u32 kind    kind 0 = scalar, 1 = r x r matrix per point
    u32 n, u32 N, u32 r      r = 1 for scalar fields
    f8 x 2n                  periods (Lx1, Ly1, ..., Lxn, Lyn)
    8 bytes                  dtype tag b"c16le\\0\\0\\0"
    complex128 values        row-major over (x1, y1, ..., xn, yn[, r, r])
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import ConfigError, GridMismatchError
from .grid import GridSpec

MAGIC = b"HYMF"
VERSION = 1
DTYPE_TAG = b"c16le\0\0\0"
_HEAD = struct.Struct("<4s5I")


def write_field(path, f: np.ndarray, grid: GridSpec) -> None:
    """Write ``f`` (shape ``grid.shape`` or ``grid.shape + (r, r)``)."""
    f = np.asarray(f)
    grid.check(f, "field")
    if f.shape == grid.shape:
        kind, r = 0, 1
    elif f.ndim == grid.ndim + 2 and f.shape[-1] == f.shape[-2]:
        kind, r = 1, f.shape[-1]
    else:
        raise GridMismatchError(f"cannot serialize field of shape {f.shape}")
    head = _HEAD.pack(MAGIC, VERSION, kind, grid.n, grid.N, r)
    periods = struct.pack(f"<{grid.ndim}d", *grid.periods)
    body = np.ascontiguousarray(f, dtype="<c16").tobytes()
    Path(path).write_bytes(head + periods + DTYPE_TAG + body)


def read_field(path, grid: GridSpec | None = None) -> tuple[np.ndarray, GridSpec]:
    """Read a field; if ``grid`` is given the header must match it."""
    data = Path(path).read_bytes()
    if len(data) < _HEAD.size:
        raise ConfigError(f"{path}: truncated header")
    magic, version, kind, n, N, r = _HEAD.unpack_from(data)
    if magic != MAGIC or version != VERSION or kind not in (0, 1):
        raise ConfigError(f"{path}: not a field file (magic={magic!r}, version={version})")
    off = _HEAD.size
    periods = struct.unpack_from(f"<{2 * n}d", data, off)
    off += 16 * n
    if data[off:off + 8] != DTYPE_TAG:
        raise ConfigError(f"{path}: unsupported dtype tag {data[off:off + 8]!r}")
    off += 8
    file_grid = GridSpec(n, N, tuple(periods))
    if grid is not None and ((grid.n, grid.N) != (n, N)
                             or not np.allclose(grid.periods, periods, rtol=1e-14, atol=0)):
        raise GridMismatchError(f"{path}: grid {file_grid} does not match {grid}")
    shape = file_grid.shape + ((r, r) if kind == 1 else ())
    count = int(np.prod(shape))
    if len(data) - off != 16 * count:
        raise ConfigError(f"{path}: expected {count} complex values, found {(len(data) - off) // 16}")
    f = np.frombuffer(data, dtype="<c16", count=count, offset=off).reshape(shape).astype(complex)
    return f, file_grid
