"""Deterministic single-channel PNG writer for mask interchange.

Masks cross a language boundary (service API, browser clients), so the byte
layout is pinned down to the bit: 8-bit grayscale, filter 0 on every row, and
a zlib stream made of stored (uncompressed) deflate blocks. Any conforming
PNG reader decodes it; an independent writer following this recipe produces
byte-identical files for the same pixels.
"""
from __future__ import annotations

import struct
import zlib

import numpy as np

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
_STORED_BLOCK_MAX = 65535


def _chunk(tag: bytes, payload: bytes) -> bytes:
    crc = zlib.crc32(tag + payload) & 0xFFFFFFFF
    return struct.pack(">I", len(payload)) + tag + payload + struct.pack(">I", crc)


def _zlib_stored(raw: bytes) -> bytes:
    # zlib header 0x78 0x01 (32K window, fastest), stored deflate blocks, adler32
    out = [b"\x78\x01"]
    n = len(raw)
    pos = 0
    while True:
        block = raw[pos : pos + _STORED_BLOCK_MAX]
        pos += len(block)
        final = 1 if pos >= n else 0
        out.append(bytes([final]))
        out.append(struct.pack("<H", len(block)))
        out.append(struct.pack("<H", len(block) ^ 0xFFFF))
        out.append(block)
        if final:
            break
    out.append(struct.pack(">I", zlib.adler32(raw) & 0xFFFFFFFF))
    return b"".join(out)


def encode_gray_png(pixels: np.ndarray) -> bytes:
    """Encode an H×W uint8 array as a deterministic grayscale PNG."""
    arr = np.asarray(pixels)
    if arr.ndim != 2:
        raise ValueError(f"expected 2-D array, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        raise ValueError(f"expected uint8 pixels, got {arr.dtype}")
    h, w = arr.shape
    ihdr = struct.pack(">IIBBBBB", w, h, 8, 0, 0, 0, 0)  # 8-bit, grayscale
    raw = b"".join(b"\x00" + arr[i].tobytes() for i in range(h))
    return (
        PNG_SIGNATURE
        + _chunk(b"IHDR", ihdr)
        + _chunk(b"IDAT", _zlib_stored(raw))
        + _chunk(b"IEND", b"")
    )
