import hashlib
import random
import struct

import cbor2
import pytest

from markinspect.blob import FileBlob
from markinspect.c2pa import (
    CBOR_UUID,
    STORE_UUID,
    HardBinding,
    ManifestFinding,
    box,
    build_manifest_store,
    embed_test_manifest,
    hash_with_exclusions,
    locate_jumbf,
    parse_boxes,
    parse_manifest_store,
    probe_c2pa,
    superbox,
    verify_hard_binding,
)
from markinspect.containers import jpeg_segment, parse_containers
from markinspect.errors import FragmentGap, MalformedBox
from markinspect.fixtures import parser_fixtures

FIXTURES = parser_fixtures()


def _oracle_png(data):
    """Locate caBX by walking chunks by hand; hash everything else."""
    pos = 8
    while True:
        (n,) = struct.unpack(">I", data[pos : pos + 4])
        if data[pos + 4 : pos + 8] == b"caBX":
            return pos, 12 + n, hashlib.sha256(data[:pos] + data[pos + 12 + n :]).digest()
        pos += 12 + n


def _exclusions(blob):
    boxes, _, _ = parse_manifest_store(locate_jumbf(blob)[0].data)
    for b in boxes[0].walk():
        if b.label == "c2pa.hash.data":
            doc = cbor2.loads(b.content_box().content)
            return [(x["start"], x["length"]) for x in doc["exclusions"]], doc["hash"]
    raise AssertionError("no data hash")


def test_clean_png_has_no_jumbf():
    assert locate_jumbf(FIXTURES["png_clean"]) == []
    f = probe_c2pa(FIXTURES["png_clean"])
    assert f == ManifestFinding(False)


def test_cabx_range_equals_chunk_payload():
    blob = FIXTURES["png_c2pa_cabx"]
    cmap = parse_containers(blob)
    (chunk,) = cmap.find("caBX")
    (stream,) = locate_jumbf(blob)
    assert stream.data == cmap.payload(chunk)


def test_split_app11_reassembly_matches_concatenation():
    blob = FIXTURES["jpeg_c2pa_split_app11"]
    cmap = parse_containers(blob)
    segs = [cmap.payload(e) for e in cmap.entries if e.type_code == 0xEB]
    assert len(segs) >= 2
    # oracle: first fragment whole, later fragments minus the 8-byte JP header and 8-byte box header
    expected = segs[0][8:] + b"".join(s[16:] for s in segs[1:])
    (stream,) = locate_jumbf(blob)
    assert stream.data == expected
    assert struct.unpack(">I", expected[:4])[0] == len(expected)


def test_missing_fragment_raises():
    blob = FIXTURES["jpeg_c2pa_split_app11"]
    cmap = parse_containers(blob)
    app11 = [e for e in cmap.entries if e.type_code == 0xEB]
    drop = app11[1]
    data = blob.data[: drop.offset] + blob.data[drop.end :]
    with pytest.raises(FragmentGap):
        locate_jumbf(FileBlob(data))
    assert probe_c2pa(FileBlob(data)).error.startswith("FragmentGap")


def test_last_fragment_missing_raises():
    blob = FIXTURES["jpeg_c2pa_split_app11"]
    cmap = parse_containers(blob)
    last = [e for e in cmap.entries if e.type_code == 0xEB][-1]
    data = blob.data[: last.offset] + blob.data[last.end :]
    with pytest.raises(FragmentGap):
        locate_jumbf(FileBlob(data))


def test_store_labels():
    store = superbox(STORE_UUID, "c2pa", superbox(CBOR_UUID, "c2pa.assertions"))
    boxes, present, labels = parse_manifest_store(store)
    assert present and labels == ("c2pa.assertions",)
    assert boxes[0].label == "c2pa" and boxes[0].children[0].type_code == "jumd"


def test_empty_superbox():
    boxes, present, labels = parse_manifest_store(superbox(STORE_UUID, "c2pa"))
    assert present and labels == ()
    _, present, _ = parse_manifest_store(superbox(STORE_UUID, "other"))
    assert not present


@pytest.mark.parametrize(
    "data",
    [b"not jumbf at all", b"\x00\x00\x00\x04jumb", b"\x00\x00\x01\x00jumb" + b"\x00" * 10, box("jumb", box("free", b""))],
)
def test_malformed(data):
    with pytest.raises(MalformedBox):
        parse_manifest_store(data)


def test_empty_stream_malformed():
    with pytest.raises(MalformedBox):
        parse_manifest_store(b"")


def test_xlbox():
    payload = b"hello"
    xl = struct.pack(">I4sQ", 1, b"free", 16 + len(payload)) + payload
    (b,) = parse_boxes(xl)
    assert b.content == payload and b.length == 21


@pytest.mark.parametrize("name", ["png_c2pa_cabx", "jpeg_c2pa_split_app11"])
def test_fixture_valid(name):
    f = probe_c2pa(FIXTURES[name])
    assert f.present and f.hard_binding is HardBinding.VALID
    assert "c2pa.hash.data" in f.manifest_labels


def test_independent_hash_oracle_png():
    data = FIXTURES["png_c2pa_cabx"].data
    start, length, digest = _oracle_png(data)
    excl, stored = _exclusions(FIXTURES["png_c2pa_cabx"])
    assert excl == [(start, length)]
    assert stored == digest


def test_independent_hash_oracle_jpeg():
    blob = FIXTURES["jpeg_c2pa_split_app11"]
    data = blob.data
    # hand walk of JPEG segments up to the first non-APP11 run after the APP11 block
    pos, app11 = 2, []
    while True:
        marker = data[pos + 1]
        (n,) = struct.unpack(">H", data[pos + 2 : pos + 4])
        if marker == 0xEB:
            app11.append((pos, n + 2))
        elif app11:
            break
        pos += 2 + n
    start, end = app11[0][0], app11[-1][0] + app11[-1][1]
    excl, stored = _exclusions(blob)
    assert excl == [(start, end - start)]
    assert stored == hashlib.sha256(data[:start] + data[end:]).digest()


@pytest.mark.parametrize("name", ["png_c2pa_cabx", "jpeg_c2pa_split_app11"])
def test_single_byte_flips_invalidate(name):
    blob = FIXTURES[name]
    excl, _ = _exclusions(blob)
    (start, length), = excl
    rng = random.Random(1234)
    candidates = [i for i in range(len(blob.data)) if not start <= i < start + length]
    boxes, _, _ = parse_manifest_store(locate_jumbf(blob)[0].data)
    for i in rng.sample(candidates, 100):
        data = bytearray(blob.data)
        data[i] ^= 1 << rng.randrange(8)
        assert verify_hard_binding(FileBlob(bytes(data)), boxes) is HardBinding.INVALID


def test_flip_inside_exclusion_not_checked():
    blob = FIXTURES["png_c2pa_cabx"]
    ((start, length),), _ = _exclusions(blob)
    boxes, _, _ = parse_manifest_store(locate_jumbf(blob)[0].data)
    data = bytearray(blob.data)
    data[start + 3] ^= 0x40  # chunk length byte: still excluded from the digest
    assert verify_hard_binding(FileBlob(bytes(data)), boxes) is HardBinding.VALID


def test_missing_data_hash():
    blob = embed_test_manifest(FIXTURES["png_clean"], include_data_hash=False)
    f = probe_c2pa(blob)
    assert f.present and f.hard_binding is HardBinding.MISSING


def test_unsupported_alg():
    store = superbox(
        STORE_UUID,
        "c2pa",
        superbox(CBOR_UUID, "c2pa.hash.data", box("cbor", cbor2.dumps({"alg": "md5", "hash": b"x", "exclusions": []}))),
    )
    boxes, _, _ = parse_manifest_store(store)
    assert verify_hard_binding(FIXTURES["png_clean"], boxes) is HardBinding.UNSUPPORTED


def test_unrecognized_content_box():
    store = superbox(STORE_UUID, "c2pa", superbox(CBOR_UUID, "c2pa.hash.data", box("xyzw", b"??")))
    boxes, _, _ = parse_manifest_store(store)
    assert verify_hard_binding(FIXTURES["png_clean"], boxes) is HardBinding.UNSUPPORTED


def test_out_of_range_exclusion_invalid():
    store = build_manifest_store("x", [(10**9, 5)], b"\x00" * 32, "m")
    boxes, _, _ = parse_manifest_store(store)
    assert verify_hard_binding(FIXTURES["png_clean"], boxes) is HardBinding.INVALID


def test_hash_with_exclusions_omits_not_zeroes():
    data = b"abcdefgh"
    assert hash_with_exclusions(data, [(2, 3)]) == hashlib.sha256(b"abfgh").digest()
    assert hash_with_exclusions(data, [(2, 3)]) != hashlib.sha256(b"ab\x00\x00\x00fgh").digest()


def test_probe_is_pure_and_deterministic():
    blob = FIXTURES["jpeg_c2pa_split_app11"]
    before = bytes(blob.data)
    assert probe_c2pa(blob) == probe_c2pa(blob)
    assert blob.data == before


def test_finding_invariant():
    with pytest.raises(ValueError):
        ManifestFinding(False, ("x",))
    f = probe_c2pa(FIXTURES["png_c2pa_cabx"])
    assert ManifestFinding.from_dict(f.to_dict()) == f


def test_non_jp_app11_ignored():
    jpg = FIXTURES["jpeg_clean"]
    cmap = parse_containers(jpg)
    data = cmap.raw(cmap.entries[0]) + jpeg_segment(0xEB, b"XX other") + jpg.data[2:]
    assert locate_jumbf(FileBlob(data)) == []
