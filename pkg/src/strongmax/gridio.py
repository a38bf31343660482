"""GRD1 binary and JSON serialization of grids.

GRD1 layout (all little-endian)::

    b"GRD1" | u32 n | u32 shape[n] | f64 cell_volume | f64 values[prod(shape)]

Values are row-major.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Union

import numpy as np

from .grid import Grid, GridError

MAGIC = b"GRD1"


class GridFormatError(GridError):
    """Malformed serialized grid; the message names the offending field."""


def to_bytes(g: Grid) -> bytes:
    head = MAGIC + struct.pack("<I", g.n) + struct.pack(f"<{g.n}I", *g.shape)
    head += struct.pack("<d", g.cell_volume)
    return head + np.ascontiguousarray(g.values, dtype="<f8").tobytes()


def from_bytes(buf: bytes) -> Grid:
    if len(buf) < 8 or buf[:4] != MAGIC:
        raise GridFormatError(f"magic: expected {MAGIC!r}, got {bytes(buf[:4])!r}")
    (n,) = struct.unpack_from("<I", buf, 4)
    if n < 1 or n > 32:
        raise GridFormatError(f"n: unsupported dimension {n}")
    off = 8
    if len(buf) < off + 4 * n + 8:
        raise GridFormatError("shape: header truncated")
    shape = struct.unpack_from(f"<{n}I", buf, off)
    off += 4 * n
    if any(s < 1 for s in shape):
        raise GridFormatError(f"shape: every axis needs >= 1 cell, got {shape}")
    (cv,) = struct.unpack_from("<d", buf, off)
    off += 8
    if not (cv > 0 and np.isfinite(cv)):
        raise GridFormatError(f"cell_volume: must be positive and finite, got {cv}")
    count = int(np.prod(shape))
    if len(buf) - off != 8 * count:
        raise GridFormatError(
            f"values: shape {tuple(shape)} needs {count} doubles, found {(len(buf) - off) / 8:g}"
        )
    values = np.frombuffer(buf, dtype="<f8", count=count, offset=off).reshape(shape)
    try:
        return Grid(values, cv)
    except GridError as exc:
        raise GridFormatError(f"values: {exc}") from None


def to_json(g: Grid) -> dict:
    return {"n": g.n, "shape": list(g.shape), "cell_volume": g.cell_volume, "values": g.flat.tolist()}


def from_json(d: dict) -> Grid:
    for key in ("shape", "values"):
        if key not in d:
            raise GridFormatError(f"{key}: missing")
    shape = tuple(int(s) for s in d["shape"])
    if "n" in d and int(d["n"]) != len(shape):
        raise GridFormatError(f"n: {d['n']} disagrees with shape {shape}")
    try:
        return Grid.from_flat(shape, d["values"], d.get("cell_volume", 1.0))
    except GridError as exc:
        raise GridFormatError(f"values: {exc}") from None


def save(g: Grid, path: Union[str, Path]) -> None:
    path = Path(path)
    if path.suffix == ".json":
        path.write_text(json.dumps(to_json(g)))
    else:
        path.write_bytes(to_bytes(g))


def load(path: Union[str, Path]) -> Grid:
    path = Path(path)
    if path.suffix == ".json":
        try:
            return from_json(json.loads(path.read_text()))
        except json.JSONDecodeError as exc:
            raise GridFormatError(f"json: {exc}") from None
    return from_bytes(path.read_bytes())
