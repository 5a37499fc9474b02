"""Binary PGM (P5) reading/writing and atomic file output."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path

import numpy as np


class PGMError(ValueError):
    pass


def atomic_write_bytes(path, data: bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def atomic_write_text(path, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))


def write_json(path, obj) -> Path:
    return atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def encode_pgm(pixels: np.ndarray) -> bytes:
    pixels = np.asarray(pixels)
    if pixels.ndim != 2:
        raise PGMError(f"PGM image must be 2-D, got shape {pixels.shape}")
    if pixels.dtype != np.uint8:
        if pixels.size and (pixels.min() < 0 or pixels.max() > 255):
            raise PGMError("8-bit PGM pixels must lie in 0..255")
        pixels = pixels.astype(np.uint8)
    h, w = pixels.shape
    return b"P5\n%d %d\n255\n" % (w, h) + np.ascontiguousarray(pixels).tobytes()


def write_pgm(path, pixels: np.ndarray) -> Path:
    return atomic_write_bytes(path, encode_pgm(pixels))


def _tokens(data: bytes):
    """Yield (token, end offset) for PGM header fields, skipping comments."""
    i, size = 0, len(data)
    while i < size:
        c = data[i:i + 1]
        if c == b"#":
            while i < size and data[i:i + 1] not in (b"\n", b"\r"):
                i += 1
        elif c.isspace():
            i += 1
        else:
            start = i
            while i < size and not data[i:i + 1].isspace() and data[i:i + 1] != b"#":
                i += 1
            yield data[start:i], i


def decode_pgm(data: bytes) -> tuple[np.ndarray, int]:
    tokens = _tokens(data)
    try:
        magic, _ = next(tokens)
        width, _ = next(tokens)
        height, _ = next(tokens)
        maxval, end = next(tokens)
        width, height, maxval = int(width), int(height), int(maxval)
    except (StopIteration, ValueError):
        raise PGMError("truncated or malformed PGM header") from None
    if not 0 < maxval < 65536:
        raise PGMError(f"invalid PGM maxval {maxval}")
    if magic == b"P5":
        dtype = np.dtype(np.uint8) if maxval < 256 else np.dtype(">u2")
        body = data[end + 1:end + 1 + width * height * dtype.itemsize]
        if len(body) != width * height * dtype.itemsize:
            raise PGMError("PGM pixel data is truncated")
        pixels = np.frombuffer(body, dtype=dtype).reshape(height, width)
    elif magic == b"P2":
        values = [int(tok) for tok, _ in tokens]
        if len(values) < width * height:
            raise PGMError("PGM pixel data is truncated")
        pixels = np.array(values[:width * height]).reshape(height, width)
    else:
        raise PGMError(f"not a PGM file (magic {magic!r})")
    return pixels.astype(np.int64), maxval


def read_pgm(path) -> tuple[np.ndarray, int]:
    return decode_pgm(Path(path).read_bytes())


def rescale_to_u8(image: np.ndarray) -> tuple[np.ndarray, dict]:
    """Affine map of ``image`` onto 0..255.

    Returns the 8-bit pixels and the parameters ``pixel = round((v - offset) * scale)``.
    A constant image maps to zero.
    """
    image = np.asarray(image, dtype=np.float64)
    lo, hi = float(image.min()), float(image.max())
    scale = 255.0 / (hi - lo) if hi > lo else 0.0
    pixels = np.clip(np.rint((image - lo) * scale), 0, 255).astype(np.uint8)
    return pixels, {"offset": lo, "scale": scale, "min": lo, "max": hi}


def write_image(path, image: np.ndarray) -> tuple[Path, Path]:
    """Write a rescaled PGM plus a ``.json`` sidecar holding the rescale parameters."""
    path = Path(path)
    pixels, params = rescale_to_u8(image)
    write_pgm(path, pixels)
    sidecar = write_json(path.with_suffix(".json"), params)
    return path, sidecar
