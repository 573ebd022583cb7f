"""Binary velocity snapshots and CSV time-series files.

Snapshot layout (all little-endian)::

    8 bytes  ASCII "NSE3SNAP"
    u32      format version (1)
    u32      N
    f64      L
    f64      nu
    f64      t
    u64      seed
    3*N^3 f64  physical velocity samples, component-major, x fastest

CSV files use '.' decimals, '\\n' line endings and 17 significant digits,
so every double survives a round trip.
"""
from __future__ import annotations

import csv
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .spectral import TorusGrid, VectorField

__all__ = [
    "SnapshotError",
    "BadMagic",
    "UnsupportedVersion",
    "TruncatedPayload",
    "NonFiniteValues",
    "Snapshot",
    "write_snapshot",
    "read_snapshot",
    "write_csv",
    "read_csv",
    "format_value",
]

MAGIC = b"NSE3SNAP"
VERSION = 1
_HEADER = struct.Struct("<8sIIdddQ")
HEADER_SIZE = _HEADER.size  # 48 bytes


class SnapshotError(ValueError):
    """Base class for unreadable snapshot files."""


class BadMagic(SnapshotError):
    pass


class UnsupportedVersion(SnapshotError):
    pass


class TruncatedPayload(SnapshotError):
    pass


class NonFiniteValues(SnapshotError):
    pass


@dataclass(frozen=True)
class Snapshot:
    N: int
    L: float
    nu: float
    t: float
    seed: int
    samples: np.ndarray  # (3, N, N, N) indexed [component, x, y, z]

    @property
    def grid(self) -> TorusGrid:
        return TorusGrid(self.N, self.L)

    def field(self) -> VectorField:
        return VectorField.from_physical(self.grid, self.samples)


def write_snapshot(path, u: VectorField, t: float, nu: float, seed: int) -> Path:
    """Write the physical samples of u; the file is replaced atomically."""
    samples = np.asarray(u.physical, dtype="<f8")
    if not np.all(np.isfinite(samples)):
        raise NonFiniteValues("refusing to write non-finite velocity samples")
    g = u.grid
    header = _HEADER.pack(MAGIC, VERSION, g.N, float(g.L), float(nu), float(t), int(seed))
    # x fastest within each component: store the (c, z, y, x) C-order array
    payload = np.ascontiguousarray(samples.transpose(0, 3, 2, 1)).tobytes()
    path = Path(path)
    tmp = path.with_name(path.name + ".part")
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(payload)
    os.replace(tmp, path)
    return path


def read_snapshot(path) -> Snapshot:
    data = Path(path).read_bytes()
    if len(data) < 8 or data[:8] != MAGIC:
        raise BadMagic(f"{path}: not a snapshot file (bad magic)")
    if len(data) < HEADER_SIZE:
        raise TruncatedPayload(f"{path}: truncated header")
    _, version, N, L, nu, t, seed = _HEADER.unpack_from(data)
    if version != VERSION:
        raise UnsupportedVersion(f"{path}: unsupported snapshot version {version} (expected {VERSION})")
    if N < 2:
        raise SnapshotError(f"{path}: invalid grid size N={N}")
    expected = 3 * N ** 3 * 8
    payload = data[HEADER_SIZE:]
    if len(payload) < expected:
        raise TruncatedPayload(f"{path}: truncated payload ({len(payload)} of {expected} bytes)")
    if len(payload) > expected:
        raise SnapshotError(f"{path}: {len(payload) - expected} trailing bytes after payload")
    arr = np.frombuffer(payload, dtype="<f8").reshape(3, N, N, N).transpose(0, 3, 2, 1)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValues(f"{path}: payload contains non-finite values")
    return Snapshot(N, L, nu, t, seed, np.ascontiguousarray(arr, dtype=float))


def format_value(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def write_csv(target, header, rows):
    """Write a header row and data rows to a path or an open text stream;
    floats get 17 significant digits."""
    if hasattr(target, "write"):
        _write_rows(target, header, rows)
        return target
    path = Path(target)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        _write_rows(fh, header, rows)
    return path


def _write_rows(fh, header, rows):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(v) for v in row])


def read_csv(path):
    """(header, rows) with every data cell parsed as float."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(x) for x in row] for row in reader]
    return header, rows
