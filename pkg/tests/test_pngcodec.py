"""The hand-rolled grayscale PNG encoder must be valid and byte-deterministic."""

import io
import zlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image

from wgain.pngcodec import PNG_SIGNATURE, encode_gray_png


def decode(data: bytes) -> np.ndarray:
    with Image.open(io.BytesIO(data)) as img:
        assert img.mode == "L"
        return np.asarray(img)


class TestEncodeGrayPng:
    def test_round_trips_through_pillow(self, rng):
        pixels = rng.integers(0, 256, size=(37, 23), dtype=np.uint8)
        assert np.array_equal(decode(encode_gray_png(pixels)), pixels)

    def test_signature_and_determinism(self):
        pixels = np.arange(64, dtype=np.uint8).reshape(8, 8)
        a = encode_gray_png(pixels)
        b = encode_gray_png(pixels)
        assert a.startswith(PNG_SIGNATURE)
        assert a == b

    def test_stored_deflate_stream_is_canonical(self):
        # zlib header 0x78 0x01 and raw stored blocks: the byte layout the
        # browser-side encoder mirrors, so it is pinned here
        pixels = np.zeros((4, 4), dtype=np.uint8)
        data = encode_gray_png(pixels)
        idat_pos = data.index(b"IDAT")
        payload_len = int.from_bytes(data[idat_pos - 4 : idat_pos], "big")
        payload = data[idat_pos + 4 : idat_pos + 4 + payload_len]
        assert payload[:2] == b"\x78\x01"
        raw = zlib.decompress(payload)
        assert len(raw) == 4 * (1 + 4)  # filter byte + row, per row

    def test_large_row_data_splits_into_multiple_blocks(self):
        # stored deflate blocks cap at 65535 bytes; a 300x300 image exceeds one
        pixels = np.full((300, 300), 200, dtype=np.uint8)
        assert np.array_equal(decode(encode_gray_png(pixels)), pixels)

    @settings(max_examples=25, deadline=None)
    @given(
        h=st.integers(min_value=1, max_value=40),
        w=st.integers(min_value=1, max_value=40),
        seed=st.integers(min_value=0, max_value=2**31),
    )
    def test_any_shape_round_trips(self, h, w, seed):
        pixels = np.random.default_rng(seed).integers(0, 256, size=(h, w), dtype=np.uint8)
        assert np.array_equal(decode(encode_gray_png(pixels)), pixels)

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            encode_gray_png(np.zeros((3, 3), dtype=np.float32))
        with pytest.raises(ValueError):
            encode_gray_png(np.zeros(9, dtype=np.uint8))
