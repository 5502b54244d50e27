"""ANIP snapshot files and trajectory directories.

Layout (little-endian): ``b"ANIP"``, version byte ``0x01``, ``u64 N``,
``u64 dims[N]``, ``f64 spacing[N]``, ``f64 origin[N]``, ``f64 time``,
``u8 boundary code`` and the ``f64`` payload in row-major order.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .grid import BOUNDARY_CODES, BOUNDARY_NAMES, Field, Grid, Trajectory

MAGIC = b"ANIP"
VERSION = 1
MANIFEST = "manifest.json"


class SnapshotFormatError(ValueError):
    pass


def encode_snapshot(fld: Field) -> bytes:
    g = fld.grid
    N = g.N
    head = MAGIC + struct.pack(
        f"<BQ{N}Q{N}d{N}ddB", VERSION, N, *g.dims, *g.spacing, *g.origin, fld.time,
        BOUNDARY_CODES[g.boundary])
    return head + np.ascontiguousarray(fld.values, dtype="<f8").tobytes()


def decode_snapshot(buf: bytes) -> Field:
    if buf[:4] != MAGIC:
        raise SnapshotFormatError("missing ANIP magic")
    if len(buf) < 14 or buf[4] != VERSION:
        raise SnapshotFormatError(f"unsupported version {buf[4] if len(buf) > 4 else None}")
    (N,) = struct.unpack_from("<Q", buf, 5)
    if not 1 <= N <= 3:
        raise SnapshotFormatError(f"bad dimension {N}")
    fmt = f"<{N}Q{N}d{N}ddB"
    off = 13
    try:
        vals = struct.unpack_from(fmt, buf, off)
    except struct.error as exc:
        raise SnapshotFormatError("truncated header") from exc
    off += struct.calcsize(fmt)
    dims = vals[:N]
    spacing = vals[N:2 * N]
    origin = vals[2 * N:3 * N]
    time, code = vals[3 * N], vals[3 * N + 1]
    if code not in BOUNDARY_NAMES:
        raise SnapshotFormatError(f"unknown boundary code {code}")
    count = int(np.prod(dims))
    if len(buf) - off != 8 * count:
        raise SnapshotFormatError(f"payload has {len(buf) - off} bytes, expected {8 * count}")
    data = np.frombuffer(buf, dtype="<f8", count=count, offset=off).reshape(dims)
    grid = Grid(tuple(dims), spacing, origin, BOUNDARY_NAMES[code])
    return Field(grid, data.astype(float), time)


def write_snapshot(path, fld: Field) -> None:
    Path(path).write_bytes(encode_snapshot(fld))


def read_snapshot(path) -> Field:
    return decode_snapshot(Path(path).read_bytes())


def dumps(obj) -> str:
    """Deterministic JSON used for every machine-readable output."""
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=True) + "\n"


def write_trajectory(directory, traj: Trajectory, extra: dict | None = None) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, snap in enumerate(traj):
        name = f"snap_{i:05d}.anip"
        write_snapshot(d / name, snap)
        entries.append({"file": name, "time": snap.time})
    manifest = {"format": "ANIP", "version": VERSION, "grid": traj.grid.to_dict(),
                "snapshots": entries, "metadata": traj.metadata}
    if extra:
        manifest.update(extra)
    (d / MANIFEST).write_text(dumps(manifest))
    return d


def read_trajectory(directory) -> Trajectory:
    d = Path(directory)
    manifest = json.loads((d / MANIFEST).read_text())
    snaps = [read_snapshot(d / e["file"]) for e in manifest["snapshots"]]
    return Trajectory(snaps, manifest.get("metadata", {}))
