"""File formats: binary PGM images and flat float64 tensors with JSON sidecars."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import FormatError
from .grid import as_grid

_WHITESPACE = b" \t\r\n\x0b\x0c"


def write_pgm(path, image, maxval: int = 255) -> None:
    """Write a [0, 1] rank-2 grid as binary PGM (P5), quantized to ``maxval``."""
    image = as_grid(image, rank=2, name="image")
    if not 1 <= maxval <= 65535:
        raise ValueError(f"PGM maxval must lie in 1..65535, got {maxval}")
    q = np.rint(np.clip(image, 0.0, 1.0) * maxval)
    payload = q.astype(">u2" if maxval > 255 else "u1").tobytes()
    header = f"P5\n{image.shape[1]} {image.shape[0]}\n{maxval}\n".encode("ascii")
    Path(path).write_bytes(header + payload)


def read_pgm(path) -> np.ndarray:
    """Read a binary PGM (P5) into a [0, 1] float64 grid."""
    raw = Path(path).read_bytes()
    magic, pos = _token(raw, 0, path, "magic")
    if magic != b"P5":
        raise FormatError(f"{path}: not a binary PGM, magic is {magic!r}")
    width, pos = _int_token(raw, pos, path, "width")
    height, pos = _int_token(raw, pos, path, "height")
    maxval, pos = _int_token(raw, pos, path, "maxval")
    if width < 1 or height < 1:
        raise FormatError(f"{path}: invalid image size {width}x{height}")
    if not 1 <= maxval <= 65535:
        raise FormatError(f"{path}: invalid maxval {maxval}")
    if pos >= len(raw) or raw[pos : pos + 1] not in tuple(
        bytes([c]) for c in _WHITESPACE
    ):
        raise FormatError(f"{path}: missing whitespace before pixel payload")
    payload = raw[pos + 1 :]
    bytes_per = 2 if maxval > 255 else 1
    expected = width * height * bytes_per
    if len(payload) != expected:
        raise FormatError(
            f"{path}: expected {expected} payload bytes for {width}x{height} "
            f"maxval {maxval}, got {len(payload)}"
        )
    dtype = ">u2" if bytes_per == 2 else "u1"
    img = np.frombuffer(payload, dtype=dtype).reshape(height, width)
    return img.astype(np.float64) / maxval


def _token(raw, pos, path, what):
    while pos < len(raw):
        c = raw[pos : pos + 1]
        if c == b"#":
            while pos < len(raw) and raw[pos : pos + 1] != b"\n":
                pos += 1
        elif c in tuple(bytes([b]) for b in _WHITESPACE):
            pos += 1
        else:
            break
    start = pos
    while pos < len(raw) and raw[pos : pos + 1] not in tuple(
        bytes([b]) for b in _WHITESPACE
    ):
        pos += 1
    if start == pos:
        raise FormatError(f"{path}: truncated header, missing {what}")
    return raw[start:pos], pos


def _int_token(raw, pos, path, what):
    tok, pos = _token(raw, pos, path, what)
    try:
        return int(tok), pos
    except ValueError:
        raise FormatError(f"{path}: header field {what} is not an integer: {tok!r}") from None


def sidecar_path(path) -> Path:
    return Path(str(path) + ".json")


def write_tensor(path, array, extra: dict | None = None) -> None:
    """Write a tensor as flat little-endian float64 plus a JSON sidecar header."""
    array = np.ascontiguousarray(np.asarray(array, dtype=np.float64))
    Path(path).write_bytes(array.astype("<f8").tobytes())
    meta = {"shape": list(array.shape), "dtype": "float64", "order": "row-major"}
    if extra:
        meta.update(extra)
    sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def read_tensor(path) -> tuple:
    """Read a tensor written by :func:`write_tensor`; returns (array, metadata)."""
    side = sidecar_path(path)
    if not side.exists():
        raise FormatError(f"{path}: missing sidecar header {side}")
    try:
        meta = json.loads(side.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{side}: malformed JSON sidecar: {exc}") from None
    for key in ("shape", "dtype", "order"):
        if key not in meta:
            raise FormatError(f"{side}: sidecar is missing the {key!r} field")
    if meta["dtype"] != "float64":
        raise FormatError(f"{side}: unsupported dtype {meta['dtype']!r}")
    if meta["order"] != "row-major":
        raise FormatError(f"{side}: unsupported order {meta['order']!r}")
    try:
        shape = tuple(int(x) for x in meta["shape"])
    except (TypeError, ValueError):
        raise FormatError(f"{side}: malformed shape {meta['shape']!r}") from None
    if not shape or any(x < 1 for x in shape):
        raise FormatError(f"{side}: invalid shape {list(shape)}")
    raw = Path(path).read_bytes()
    expected = int(np.prod(shape)) * 8
    if len(raw) != expected:
        raise FormatError(
            f"{path}: expected {expected} bytes for shape {list(shape)}, got {len(raw)}"
        )
    return np.frombuffer(raw, dtype="<f8").reshape(shape).copy(), meta


def write_grid(path, array, maxval: int = 255) -> None:
    """Write rank-2 grids with a .pgm suffix as PGM, anything else as a tensor."""
    if str(path).lower().endswith(".pgm"):
        write_pgm(path, array, maxval)
    else:
        write_tensor(path, array)


def read_grid(path) -> np.ndarray:
    if str(path).lower().endswith(".pgm"):
        return read_pgm(path)
    return read_tensor(path)[0]
