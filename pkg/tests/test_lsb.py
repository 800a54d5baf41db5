import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import noise_rgb, smooth_rgb
from markinspect.errors import CapacityExceeded, CorruptFrame, NotFound
from markinspect.image import Channels, RasterImage, decode_raster, encode_raster, psnr
from markinspect.lsb import (
    OVERHEAD_BYTES,
    build_frame,
    capacity_bits,
    lsb_embed,
    lsb_extract,
)


def test_roundtrip_random(rng):
    for i in range(10):
        img = noise_rgb(32, 24, seed=i)
        p = rng.bytes(int(rng.integers(0, 200)))
        assert lsb_extract(lsb_embed(img, p)) == p


def test_zero_gray_image_bits():
    img = RasterImage(np.zeros((16, 16), np.uint8), Channels.GRAY)
    payload = b"hi"
    marked = lsb_embed(img, payload)
    bits = np.unpackbits(np.frombuffer(build_frame(payload), np.uint8))
    flat = marked.samples.reshape(-1)
    assert np.array_equal(flat[: bits.size], bits)
    assert np.all(flat[bits.size :] == 0)


def test_psnr_bound():
    for seed in range(5):
        img = smooth_rgb(64, 64, seed)
        marked = lsb_embed(img, bytes(range(256)) * 2)
        assert psnr(img, marked) >= 48.13


def test_max_change_one(rng):
    img = noise_rgb(20, 20, 3)
    marked = lsb_embed(img, rng.bytes(100))
    diff = np.abs(marked.samples.astype(int) - img.samples.astype(int))
    assert diff.max() <= 1
    assert np.array_equal(marked.samples >> 1, img.samples >> 1)


def test_capacity_exceeded_reports_bits():
    img = RasterImage(np.zeros((4, 4, 3), np.uint8), Channels.RGB)
    with pytest.raises(CapacityExceeded) as exc:
        lsb_embed(img, b"x" * 10)
    assert exc.value.required_bits == (10 + OVERHEAD_BYTES) * 8
    assert exc.value.available_bits == 48


def test_alpha_untouched_and_excluded(rng):
    arr = rng.integers(0, 256, (10, 10, 4), dtype=np.uint8)
    img = RasterImage(arr, Channels.RGBA)
    assert capacity_bits(img) == 300
    marked = lsb_embed(img, b"abc")
    assert np.array_equal(marked.samples[:, :, 3], arr[:, :, 3])
    assert lsb_extract(marked) == b"abc"


def test_empty_payload_legal():
    img = smooth_rgb(8, 8)
    assert lsb_extract(lsb_embed(img, b"")) == b""


def test_random_noise_not_found():
    hits = 0
    for seed in range(1000):
        try:
            lsb_extract(noise_rgb(8, 8, seed=seed))
            hits += 1
        except NotFound:
            pass
    assert hits == 0


def test_corrupt_frame_detected():
    img = smooth_rgb(32, 32)
    marked = np.array(lsb_embed(img, b"payload").samples)
    flat = marked.reshape(-1)
    flat[60] ^= 1  # inside the body, after the 48-bit header
    with pytest.raises(CorruptFrame):
        lsb_extract(RasterImage(marked, Channels.RGB))


def test_survives_png():
    img = smooth_rgb(64, 64)
    marked = lsb_embed(img, b"TESTMARK0001")
    back = decode_raster(encode_raster(marked, "PNG"))
    assert lsb_extract(back) == b"TESTMARK0001"


def test_fragile_under_jpeg():
    img = smooth_rgb(64, 64)
    marked = lsb_embed(img, b"TESTMARK0001")
    back = decode_raster(encode_raster(marked, "JPEG", quality=90))
    with pytest.raises((NotFound, CorruptFrame)):
        lsb_extract(back)


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_roundtrip_property(data):
    img = noise_rgb(12, 10, seed=data.draw(st.integers(0, 10_000)))
    cap = capacity_bits(img) // 8 - OVERHEAD_BYTES
    payload = data.draw(st.binary(min_size=0, max_size=cap))
    assert lsb_extract(lsb_embed(img, payload)) == payload
