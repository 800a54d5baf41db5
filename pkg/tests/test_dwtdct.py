import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import noise_rgb, smooth_rgb
from markinspect import kernels
from markinspect.dwtdct import (
    DwtDctParams,
    PayloadRegistry,
    WatermarkPayload,
    _luma_ll,
    dwtdct_detect,
    dwtdct_embed,
    dwtdct_extract_bits,
    embed_ll,
    hamming_fraction,
    min_side,
    registry_from_labels,
)
from markinspect.errors import BadParams, EmptyRegistry, ImageTooSmall
from markinspect.image import (
    Channels,
    RasterImage,
    decode_raster,
    encode_raster,
    psnr,
)
from markinspect.metadata import strip_metadata

LABELS = ["TESTMARK0001", "SYNTHGEN-A01", "DIFFUSION-XL", "PIXELFORGE-7"]


@pytest.fixture(scope="module")
def registry():
    return registry_from_labels(LABELS)


def test_roundtrip_random_rgb(backend, registry):
    p = registry.lookup("TESTMARK0001")
    img = noise_rgb(256, 256, seed=5)
    bits = dwtdct_extract_bits(dwtdct_embed(img, p), bit_count=96).bits
    assert hamming_fraction(bits, p.bits) == 0.0


def test_gray_and_rgba(registry):
    p = registry.lookup("SYNTHGEN-A01")
    rgb = smooth_rgb(128, 128, 2)
    gray = RasterImage(rgb.samples[:, :, 1], Channels.GRAY)
    alpha = np.full((128, 128, 1), 200, np.uint8)
    rgba = RasterImage(np.concatenate([rgb.samples, alpha], axis=2), Channels.RGBA)
    for img in (gray, rgba):
        marked = dwtdct_embed(img, p)
        assert marked.channels is img.channels
        assert dwtdct_detect(marked, registry).label == "SYNTHGEN-A01"
    assert np.array_equal(dwtdct_embed(rgba, p).samples[:, :, 3], alpha[:, :, 0])


def test_odd_dimensions_keep_margin(registry):
    p = registry.lookup("TESTMARK0001")
    img = smooth_rgb(101, 99, 3)
    marked = dwtdct_embed(img, p)
    assert np.array_equal(marked.samples[-1], img.samples[-1])
    assert np.array_equal(marked.samples[:, -1], img.samples[:, -1])
    assert dwtdct_detect(marked, registry).distance_fraction == 0.0


def test_too_small():
    p = WatermarkPayload.from_bytes(b"TESTMARK0001")
    img = RasterImage(np.zeros((16, 16, 3), np.uint8), Channels.RGB)
    with pytest.raises(ImageTooSmall) as exc:
        dwtdct_embed(img, p)
    assert exc.value.min_width == 80 == min_side(96)
    with pytest.raises(ImageTooSmall):
        dwtdct_extract_bits(img, bit_count=96)


def test_minimum_size_works(registry):
    p = registry.lookup("PIXELFORGE-7")
    img = smooth_rgb(80, 80, 1)
    assert dwtdct_detect(dwtdct_embed(img, p), registry).label == "PIXELFORGE-7"


def test_psnr_floor_over_corpus(registry):
    p = registry.lookup("TESTMARK0001")
    values = []
    for seed in range(20):
        img = smooth_rgb(256, 256, seed) if seed % 2 else noise_rgb(256, 256, seed)
        values.append(psnr(img, dwtdct_embed(img, p)))
    assert min(values) >= 38.0


def test_null_distribution():
    p = WatermarkPayload.from_bytes(b"TESTMARK0001")
    d = [
        hamming_fraction(dwtdct_extract_bits(noise_rgb(128, 128, s), bit_count=96).bits, p.bits)
        for s in range(200)
    ]
    assert 0.4 <= float(np.mean(d)) <= 0.6


def test_no_false_positives(registry):
    hits = 0
    for s in range(200):
        if dwtdct_detect(noise_rgb(128, 128, 10_000 + s), registry).detected:
            hits += 1
    for s in range(20):
        if dwtdct_detect(smooth_rgb(256, 256, 500 + s), registry).detected:
            hits += 1
    assert hits == 0


def test_jpeg85_within_threshold(registry):
    p = registry.lookup("TESTMARK0001")
    for seed in range(10):
        marked = dwtdct_embed(smooth_rgb(256, 256, seed), p)
        back = decode_raster(encode_raster(marked, "JPEG", quality=85))
        bits = dwtdct_extract_bits(back, bit_count=96).bits
        assert hamming_fraction(bits, p.bits) <= 0.20


def test_detect_labels_and_distance(registry):
    marked = dwtdct_embed(smooth_rgb(), registry.lookup("TESTMARK0001"))
    res = dwtdct_detect(marked, registry)
    assert res.detected and res.label == "TESTMARK0001" and res.distance_fraction == 0.0


def test_clean_not_detected(registry):
    res = dwtdct_detect(noise_rgb(256, 256, 77), registry)
    assert not res.detected and res.label is None
    assert 0.3 <= res.distance_fraction <= 0.7


def test_survives_metadata_strip(registry):
    from markinspect.metadata import DigitalSourceDeclaration, embed_ai_metadata

    marked = dwtdct_embed(smooth_rgb(), registry.lookup("DIFFUSION-XL"))
    blob = embed_ai_metadata(encode_raster(marked, "PNG"), DigitalSourceDeclaration("Gen"))
    stripped = strip_metadata(blob)
    assert dwtdct_detect(decode_raster(stripped), registry).label == "DIFFUSION-XL"


def test_empty_registry():
    with pytest.raises(EmptyRegistry):
        dwtdct_detect(smooth_rgb(), PayloadRegistry(()))


def test_registry_validation():
    a = WatermarkPayload.from_bytes(b"ab")
    with pytest.raises(BadParams):
        PayloadRegistry((("x", a), ("x", a)))
    with pytest.raises(BadParams):
        PayloadRegistry((("x", a), ("y", WatermarkPayload.from_bytes(b"abc"))))


def test_registry_json_roundtrip(registry):
    text = registry.to_json()
    rows = json.loads(text)
    assert rows[0] == {"label": "TESTMARK0001", "payload": b"TESTMARK0001".hex()}
    assert PayloadRegistry.from_json(text) == registry


@pytest.mark.parametrize("kw", [{"delta": 0}, {"delta": -1.0}, {"coeff_index": (0, 0)}, {"coeff_index": (4, 1)}])
def test_bad_params(kw):
    with pytest.raises(BadParams):
        DwtDctParams(**kw)


def test_coefficients_on_coset_before_rounding(registry):
    params = DwtDctParams()
    p = registry.lookup("TESTMARK0001")
    _, sb = _luma_ll(noise_rgb(128, 128, 9))
    marked = embed_ll(sb.ll, p, params)
    q = kernels.block_coefficients(marked, params.pattern()) / params.delta
    idx = np.arange(q.size) % len(p)
    off = 0.5 * p.bits[idx].reshape(q.shape)
    dist = np.abs((q - off) - np.round(q - off)) * params.delta
    assert dist.max() <= 1e-9


def test_chroma_preserved(registry):
    img = smooth_rgb(256, 256, 4)
    marked = dwtdct_embed(img, registry.lookup("TESTMARK0001"))

    def chroma(im):
        s = im.samples.astype(float)
        y = s @ np.array([0.299, 0.587, 0.114])
        return s[:, :, 2] - y, s[:, :, 0] - y

    for before, after in zip(chroma(img), chroma(marked)):
        assert np.max(np.abs(before - after)) <= 1.0


def test_backends_produce_same_bits(registry):
    found = kernels.backends()
    if len(found) < 2:
        pytest.skip("compiled kernels not built")
    img = noise_rgb(128, 128, 3)
    p = registry.lookup("TESTMARK0001")
    outs = []
    for name in ("python", "cython"):
        mp = pytest.MonkeyPatch()
        for fn in ("block_coefficients", "shift_block_coefficients", "round_luma_shift", "haar_forward", "haar_inverse"):
            mp.setattr(kernels, fn, getattr(found[name], fn))
        outs.append(dwtdct_embed(img, p))
        mp.undo()
    assert outs[0] == outs[1]


@settings(max_examples=15, deadline=None)
@given(
    w=st.integers(80, 160),
    h=st.integers(80, 160),
    seed=st.integers(0, 2**16),
    smooth=st.booleans(),
    payload=st.binary(min_size=12, max_size=12),
)
def test_detect_after_embed_property(w, h, seed, smooth, payload):
    img = smooth_rgb(w, h, seed) if smooth else noise_rgb(w, h, seed)
    p = WatermarkPayload.from_bytes(payload)
    reg = PayloadRegistry((("mark", p),))
    res = dwtdct_detect(dwtdct_embed(img, p), reg)
    assert res.detected and res.distance_fraction == 0.0
