"""Binary PGM (P5) / PPM (P6) reading and PGM writing.

Images are ``(height, width)`` uint8 arrays, row-major.
"""
from __future__ import annotations

import os

import numpy as np

from .errors import ParseError

_WHITESPACE = b" \t\r\n\v\f"


def _header_tokens(data: bytes, count: int):
    """Return ``count`` header tokens and the offset of the raster."""
    tokens = []
    i = 0
    n = len(data)
    while len(tokens) < count:
        while i < n and (data[i] in _WHITESPACE or data[i] == ord("#")):
            if data[i] == ord("#"):
                while i < n and data[i] not in b"\r\n":
                    i += 1
            else:
                i += 1
        if i >= n:
            raise ParseError("truncated header")
        start = i
        while i < n and data[i] not in _WHITESPACE and data[i] != ord("#"):
            i += 1
        tokens.append(data[start:i])
    # exactly one whitespace byte separates maxval from the raster
    if i >= n or data[i] not in _WHITESPACE:
        raise ParseError("missing whitespace after header")
    return tokens, i + 1


def luma(rgb: np.ndarray) -> np.ndarray:
    """BT.601 luma rounded to nearest, in exact integer arithmetic."""
    rgb = rgb.astype(np.uint32)
    y = (299 * rgb[..., 0] + 587 * rgb[..., 1] + 114 * rgb[..., 2] + 500) // 1000
    return y.astype(np.uint8)


def parse_pnm(data: bytes) -> np.ndarray:
    """Decode P5/P6 bytes to a grayscale image; P6 is converted with :func:`luma`."""
    if len(data) < 2 or data[:1] != b"P" or data[1:2] not in (b"5", b"6"):
        raise ParseError("not a binary PGM (P5) or PPM (P6) file")
    channels = 1 if data[1:2] == b"5" else 3
    tokens, offset = _header_tokens(data[2:], 3)
    offset += 2
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError:
        raise ParseError(f"non-integer header field in {tokens!r}") from None
    if width <= 0 or height <= 0:
        raise ParseError(f"invalid image size {width}x{height}")
    if maxval != 255:
        raise ParseError(f"maxval must be 255, got {maxval}")
    size = width * height * channels
    raster = data[offset:offset + size]
    if len(raster) != size:
        raise ParseError(f"expected {size} raster bytes, found {len(raster)}")
    pixels = np.frombuffer(raster, dtype=np.uint8)
    if channels == 1:
        return pixels.reshape(height, width).copy()
    return luma(pixels.reshape(height, width, 3))


def read_image(path: str | os.PathLike) -> np.ndarray:
    with open(path, "rb") as fh:
        return parse_pnm(fh.read())


def encode_pgm(img: np.ndarray) -> bytes:
    img = np.asarray(img)
    if img.ndim != 2 or img.dtype != np.uint8:
        raise ValueError("expected a 2-D uint8 image")
    h, w = img.shape
    return b"P5\n%d %d\n255\n" % (w, h) + np.ascontiguousarray(img).tobytes()


def write_pgm(path: str | os.PathLike, img: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_pgm(img))
