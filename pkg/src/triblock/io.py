"""Artifact formats and their loaders.

* ``TDF1`` snapshots: ASCII magic ``TDF1``, little-endian ``u32`` resolution
  ``n``, ``u32`` channel count, then ``channels * n * n`` little-endian
  float64 values, channel-major and row-major within a channel.
* Binary PGM (``P5``, 8-bit) for label images and PPM (``P6``) for
  colour renderings.
* Energy histories as CSV (see :mod:`triblock.flow`) and reports as JSON.
"""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

from .energy import PhaseDensity

__all__ = [
    "write_tdf",
    "read_tdf",
    "write_snapshot",
    "read_snapshot",
    "write_pgm",
    "read_pgm",
    "write_ppm",
    "read_ppm",
    "labels_to_pgm",
    "render_rgb",
    "write_json",
    "read_json",
    "write_rows_csv",
    "read_rows_csv",
    "FormatError",
]

MAGIC = b"TDF1"
_HEADER = struct.Struct("<4sII")


class FormatError(ValueError):
    """A file does not follow the expected artifact format."""


def write_tdf(path, channels: np.ndarray) -> None:
    arr = np.asarray(channels, dtype="<f8")
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
        raise ValueError("channels must have shape (c, n, n)")
    c, n, _ = arr.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, n, c))
        fh.write(np.ascontiguousarray(arr).tobytes(order="C"))


def read_tdf(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError("file too short for a TDF1 header")
    magic, n, c = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    expected = _HEADER.size + 8 * c * n * n
    if len(raw) != expected:
        raise FormatError(f"expected {expected} bytes, found {len(raw)}")
    return np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(c, n, n).astype(np.float64)


def write_snapshot(path, u: PhaseDensity) -> None:
    write_tdf(path, np.stack([u.u1.data, u.u2.data]))


def read_snapshot(path) -> PhaseDensity:
    arr = read_tdf(path)
    if arr.shape[0] != 2:
        raise FormatError(f"a phase snapshot has 2 channels, found {arr.shape[0]}")
    return PhaseDensity.from_arrays(arr[0], arr[1])


def _read_netpbm(path, magic: bytes):
    raw = Path(path).read_bytes()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while pos < len(raw) and raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            while pos < len(raw) and raw[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos:pos + 1].isspace():
            pos += 1
        tokens.append(raw[start:pos])
    if tokens[0] != magic:
        raise FormatError(f"expected {magic!r}, found {tokens[0]!r}")
    w, h, maxval = (int(t) for t in tokens[1:])
    if maxval != 255:
        raise FormatError("only 8-bit images are supported")
    return raw[pos + 1:], w, h


def write_pgm(path, image: np.ndarray) -> None:
    img = np.asarray(image)
    if img.ndim != 2:
        raise ValueError("a PGM image is 2-D")
    data = np.clip(img, 0, 255).astype(np.uint8)
    h, w = data.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (w, h))
        fh.write(data.tobytes())


def read_pgm(path) -> np.ndarray:
    body, w, h = _read_netpbm(path, b"P5")
    if len(body) != w * h:
        raise FormatError("PGM payload size mismatch")
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w).copy()


def labels_to_pgm(labels: np.ndarray) -> np.ndarray:
    """Map labels {0, 1, 2} to grey levels {0, 127, 254} (``grey // 127`` inverts)."""
    return (np.asarray(labels, dtype=np.int64) * 127).astype(np.uint8)


def write_ppm(path, rgb: np.ndarray) -> None:
    img = np.asarray(rgb)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError("a PPM image has shape (h, w, 3)")
    data = np.clip(img, 0, 255).astype(np.uint8)
    h, w, _ = data.shape
    with open(path, "wb") as fh:
        fh.write(b"P6\n%d %d\n255\n" % (w, h))
        fh.write(data.tobytes())


def read_ppm(path) -> np.ndarray:
    body, w, h = _read_netpbm(path, b"P6")
    if len(body) != 3 * w * h:
        raise FormatError("PPM payload size mismatch")
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w, 3).copy()


_COLOURS = np.array([[245, 245, 245], [214, 39, 40], [31, 119, 180]], dtype=np.float64)


def render_rgb(u: PhaseDensity) -> np.ndarray:
    """Blend a fixed colour per phase by the (clipped) densities."""
    u1 = np.clip(u.u1.data, 0, 1)
    u2 = np.clip(u.u2.data, 0, 1)
    u0 = np.clip(1.0 - u1 - u2, 0, 1)
    w = np.stack([u0, u1, u2], axis=-1)
    w = w / np.maximum(w.sum(axis=-1, keepdims=True), 1e-12)
    return np.round(w @ _COLOURS).astype(np.uint8)


def write_json(path, doc) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, default=_json_default) + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if hasattr(obj, "value"):
        return obj.value
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def write_rows_csv(path, rows: list[dict], fieldnames: list[str] | None = None) -> None:
    if fieldnames is None:
        fieldnames = []
        for row in rows:
            for k in row:
                if k not in fieldnames:
                    fieldnames.append(k)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def read_rows_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
