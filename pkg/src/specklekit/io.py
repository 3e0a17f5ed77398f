"""File formats: key=value text, FIMG exact images, 16-bit PGM export, CSV rows.

FIMG v1 is an ASCII header line ``FIMG 1 <width> <height>`` followed by the
pixels in row-major order as little-endian IEEE-754 doubles. It is the
exchange format for all pipeline math. PGM (P5, maxval 65535, big-endian) is a
lossy viewing export: pixel values are mapped linearly from ``[lo, hi]`` to
``[0, 65535]`` and rounded, with ``lo``/``hi`` the image min and max unless
given.
"""
from __future__ import annotations

import os
from pathlib import Path

import numpy as np

__all__ = [
    "FormatError",
    "read_keyvalue",
    "write_keyvalue",
    "format_real",
    "write_fimg",
    "read_fimg",
    "write_pgm",
    "read_pgm",
    "atomic_write_text",
]


class FormatError(ValueError):
    pass


def read_keyvalue(path) -> dict:
    """Parse ``key=value`` lines; blank lines and ``#`` comments are skipped."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in out:
            raise FormatError(f"{path}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def write_keyvalue(path, mapping: dict) -> None:
    atomic_write_text(path, "".join(f"{k}={v}\n" for k, v in mapping.items()))


def format_real(x: float) -> str:
    """17 significant digits, enough to round-trip any double."""
    return format(float(x), ".17g")


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def write_fimg(path, image) -> None:
    img = np.asarray(image, dtype=float)
    if img.ndim != 2:
        raise FormatError("FIMG stores 2-D images only")
    h, w = img.shape
    with open(path, "wb") as f:
        f.write(f"FIMG 1 {w} {h}\n".encode("ascii"))
        f.write(img.astype("<f8").tobytes(order="C"))


def read_fimg(path) -> np.ndarray:
    data = Path(path).read_bytes()
    nl = data.find(b"\n")
    if nl < 0:
        raise FormatError(f"{path}: missing FIMG header")
    parts = data[:nl].split()
    if len(parts) != 4 or parts[0] != b"FIMG" or parts[1] != b"1":
        raise FormatError(f"{path}: not a FIMG v1 file")
    w, h = int(parts[2]), int(parts[3])
    body = data[nl + 1:]
    if len(body) != 8 * w * h:
        raise FormatError(f"{path}: expected {8 * w * h} pixel bytes, found {len(body)}")
    return np.frombuffer(body, dtype="<f8").reshape(h, w).astype(float)


def write_pgm(path, image, lo=None, hi=None):
    """Write a 16-bit binary PGM; returns the (lo, hi) range that maps to 0 and 65535."""
    img = np.asarray(image, dtype=float)
    lo = float(img.min()) if lo is None else float(lo)
    hi = float(img.max()) if hi is None else float(hi)
    scale = 65535.0 / (hi - lo) if hi > lo else 0.0
    q = np.clip(np.rint((img - lo) * scale), 0, 65535).astype(">u2")
    h, w = img.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        f.write(q.tobytes(order="C"))
    return lo, hi


def read_pgm(path) -> np.ndarray:
    """Read a binary P5 PGM (8- or 16-bit) into an integer array."""
    data = Path(path).read_bytes()
    fields, pos = [], 0
    while len(fields) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos])
    if fields[0] != b"P5":
        raise FormatError(f"{path}: not a binary PGM")
    w, h, maxval = (int(x) for x in fields[1:])
    pos += 1
    dtype = ">u2" if maxval > 255 else "u1"
    body = np.frombuffer(data[pos:], dtype=dtype)
    if body.size != w * h:
        raise FormatError(f"{path}: expected {w * h} pixels, found {body.size}")
    return body.reshape(h, w).astype(np.int64)
