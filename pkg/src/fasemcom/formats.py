"""Binary raster and feature-tensor file formats.

HMAP: ``b"HMAP"``, u32 width, u32 height, then width*height f32, row-major.
FTNS: ``b"FTNS"``, u32 patch_count, u32 dims_per_patch, f32 v_max, then
patch_count*dims_per_patch f32. All integers and floats are little-endian.
Heatmaps may also be plain-text PGM (P2), rescaled by maxval.
"""
from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .errors import FormatError

HMAP_MAGIC = b"HMAP"
FTNS_MAGIC = b"FTNS"


def atomic_write(path, data: bytes):
    """Write ``data`` to ``path`` via a temp file + rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def encode_hmap(values) -> bytes:
    v = np.asarray(values, dtype="<f4")
    if v.ndim != 2:
        raise ValueError("raster must be 2-D")
    h, w = v.shape
    return HMAP_MAGIC + struct.pack("<II", w, h) + np.ascontiguousarray(v).tobytes()


def write_hmap(path, values):
    atomic_write(path, encode_hmap(values))


def decode_hmap(data: bytes, name="<bytes>") -> np.ndarray:
    if len(data) < 12 or data[:4] != HMAP_MAGIC:
        raise FormatError(f"{name}: not an HMAP file")
    w, h = struct.unpack_from("<II", data, 4)
    expected = 12 + 4 * w * h
    if w == 0 or h == 0 or len(data) != expected:
        raise FormatError(f"{name}: {w}x{h} raster needs {expected} bytes, file has {len(data)}")
    return np.frombuffer(data, dtype="<f4", offset=12).reshape(h, w).astype(np.float64)


def decode_pgm(data: bytes, name="<bytes>") -> np.ndarray:
    """Plain (P2) or raw (P5) PGM, scaled to [0, 1] by maxval."""
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise FormatError(f"{name}: not a PGM file")
    fields, pos = [], 2
    while len(fields) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError(f"{name}: truncated PGM header")
        fields.append(int(data[start:pos]))
    w, h, maxval = fields
    if w <= 0 or h <= 0 or not 0 < maxval < 65536:
        raise FormatError(f"{name}: bad PGM header {fields}")
    if magic == b"P2":
        vals = data[pos:].split()
        if len(vals) != w * h:
            raise FormatError(f"{name}: expected {w * h} samples, found {len(vals)}")
        arr = np.array([int(x) for x in vals], dtype=np.float64)
    else:
        pos += 1
        dtype = ">u2" if maxval > 255 else "u1"
        arr = np.frombuffer(data, dtype=dtype, count=w * h, offset=pos).astype(np.float64)
    if arr.min() < 0 or arr.max() > maxval:
        raise FormatError(f"{name}: sample outside [0, {maxval}]")
    return arr.reshape(h, w) / maxval


def encode_pgm(values, maxval=255) -> bytes:
    v = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    q = np.rint(v * maxval).astype(int)
    h, w = q.shape
    rows = "\n".join(" ".join(str(x) for x in row) for row in q)
    return f"P2\n{w} {h}\n{maxval}\n{rows}\n".encode("ascii")


def read_raster(path) -> np.ndarray:
    """Read an HMAP or PGM raster as float64 (height, width)."""
    data = Path(path).read_bytes()
    if data[:4] == HMAP_MAGIC:
        return decode_hmap(data, str(path))
    return decode_pgm(data, str(path))


def encode_ftns(values, v_max: float) -> bytes:
    v = np.asarray(values, dtype="<f4")
    if v.ndim != 2:
        raise ValueError("feature tensor must be 2-D (patches, dims)")
    n, d = v.shape
    return FTNS_MAGIC + struct.pack("<IIf", n, d, v_max) + np.ascontiguousarray(v).tobytes()


def write_ftns(path, values, v_max: float):
    atomic_write(path, encode_ftns(values, v_max))


def read_ftns(path):
    """Return ``(values, v_max)`` from an FTNS file."""
    data = Path(path).read_bytes()
    if len(data) < 16 or data[:4] != FTNS_MAGIC:
        raise FormatError(f"{path}: not an FTNS file")
    n, d, v_max = struct.unpack_from("<IIf", data, 4)
    expected = 16 + 4 * n * d
    if n == 0 or d == 0 or len(data) != expected:
        raise FormatError(f"{path}: {n}x{d} tensor needs {expected} bytes, file has {len(data)}")
    values = np.frombuffer(data, dtype="<f4", offset=16).reshape(n, d).astype(np.float64)
    return values, float(v_max)
