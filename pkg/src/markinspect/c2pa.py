"""Structural C2PA probe: JUMBF location, box parsing, data-hash check.

Only the hard binding is verified: the SHA-2 digest stored in the
``c2pa.hash.data`` assertion is recomputed over the file with the
exclusion ranges left out (omitted, not zeroed).  Claim signatures and
certificate trust are not evaluated, so ``Valid`` means "this digest binds
to these bytes", never "authentic".
"""

from __future__ import annotations

import enum
import hashlib
import hmac
import json
import struct
import uuid
from dataclasses import dataclass, field

import cbor2

from .blob import FileBlob, ImageFormat
from .containers import ContainerMap, jpeg_segment, parse_containers, png_chunk
from .errors import FragmentGap, MalformedBox

VERSION = "c2pa-probe/1"

_UUID_SUFFIX = bytes.fromhex("00110010800000AA00389B71")
STORE_UUID = b"c2pa" + _UUID_SUFFIX
MANIFEST_UUID = b"c2ma" + _UUID_SUFFIX
ASSERTION_STORE_UUID = b"c2as" + _UUID_SUFFIX
CLAIM_UUID = b"c2cl" + _UUID_SUFFIX
SIGNATURE_UUID = b"c2cs" + _UUID_SUFFIX
CBOR_UUID = b"cbor" + _UUID_SUFFIX
JSON_UUID = b"json" + _UUID_SUFFIX

DATA_HASH_LABEL = "c2pa.hash.data"
_HASHES = {"sha256": hashlib.sha256, "sha384": hashlib.sha384, "sha512": hashlib.sha512}


class HardBinding(str, enum.Enum):
    VALID = "Valid"
    INVALID = "Invalid"
    MISSING = "Missing"
    UNSUPPORTED = "Unsupported"


@dataclass(frozen=True)
class JumbfBox:
    length: int
    type_code: str
    payload_offset: int  # relative to the start of the JUMBF stream
    payload_size: int
    label: str | None = None
    box_uuid: bytes | None = None
    children: tuple["JumbfBox", ...] = ()
    content: bytes = field(default=b"", repr=False)  # payload of non-superboxes

    @property
    def is_superbox(self) -> bool:
        return self.type_code == "jumb"

    def walk(self):
        yield self
        for c in self.children:
            yield from c.walk()

    def content_box(self) -> "JumbfBox | None":
        """First child that is not the description box."""
        for c in self.children:
            if c.type_code != "jumd":
                return c
        return None

    def to_dict(self) -> dict:
        d = {
            "type": self.type_code,
            "length": self.length,
            "payload_offset": self.payload_offset,
            "payload_size": self.payload_size,
        }
        if self.label is not None:
            d["label"] = self.label
        if self.children:
            d["children"] = [c.to_dict() for c in self.children if c.type_code != "jumd"]
        return d


@dataclass(frozen=True)
class JumbfStream:
    data: bytes
    source_ranges: tuple[tuple[int, int], ...]  # (file offset, length) of carrier blocks


@dataclass(frozen=True)
class ManifestFinding:
    present: bool
    manifest_labels: tuple[str, ...] = ()
    hard_binding: HardBinding = HardBinding.MISSING
    error: str | None = None

    def __post_init__(self):
        if not self.present and (self.manifest_labels or self.hard_binding is not HardBinding.MISSING):
            raise ValueError("absent manifest cannot carry labels or a binding result")

    def to_dict(self) -> dict:
        return {
            "present": self.present,
            "manifest_labels": list(self.manifest_labels),
            "hard_binding": self.hard_binding.value,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ManifestFinding":
        return cls(d["present"], tuple(d["manifest_labels"]), HardBinding(d["hard_binding"]), d.get("error"))


# -- location ---------------------------------------------------------------


def locate_jumbf(blob: FileBlob, cmap: ContainerMap | None = None) -> list[JumbfStream]:
    """JUMBF streams carried by caBX chunks (PNG) or JPEG-XT APP11 segments (JPEG)."""
    cmap = cmap or parse_containers(blob)
    if cmap.format is ImageFormat.PNG:
        return [
            JumbfStream(cmap.payload(e), ((e.offset, e.length),))
            for e in cmap.entries
            if e.type_code == "caBX"
        ]
    groups: dict[int, list] = {}
    for e in cmap.entries:
        if e.type_code != 0xEB:
            continue
        data = cmap.payload(e)
        if len(data) < 8 or data[:2] != b"JP":
            continue
        instance, seq = struct.unpack(">HI", data[2:8])
        groups.setdefault(instance, []).append((seq, data[8:], (e.offset, e.length)))
    streams = []
    for instance in sorted(groups):
        frags = sorted(groups[instance], key=lambda f: f[0])
        seqs = [f[0] for f in frags]
        if seqs != list(range(1, len(frags) + 1)):
            raise FragmentGap(f"JUMBF instance {instance} has sequence numbers {seqs}")
        first = frags[0][1]
        header = _box_header_size(first)
        body = first + b"".join(f[1][header:] for f in frags[1:])
        declared = _declared_length(first)
        if declared and declared != len(body):
            raise FragmentGap(
                f"JUMBF instance {instance} reassembles to {len(body)} bytes, box declares {declared}"
            )
        streams.append(JumbfStream(body, tuple(f[2] for f in frags)))
    return streams


def _box_header_size(data: bytes) -> int:
    if len(data) >= 4 and struct.unpack(">I", data[:4])[0] == 1:
        return 16
    return 8


def _declared_length(data: bytes) -> int:
    if len(data) < 8:
        return 0
    (lbox,) = struct.unpack(">I", data[:4])
    if lbox == 1 and len(data) >= 16:
        return struct.unpack(">Q", data[8:16])[0]
    return lbox


# -- parsing ----------------------------------------------------------------


def parse_boxes(data: bytes, start: int = 0, end: int | None = None) -> list[JumbfBox]:
    end = len(data) if end is None else end
    boxes = []
    pos = start
    while pos < end:
        if end - pos < 8:
            raise MalformedBox(f"{end - pos} stray bytes at offset {pos}")
        lbox, tbox = struct.unpack_from(">I4s", data, pos)
        header = 8
        if lbox == 1:
            if end - pos < 16:
                raise MalformedBox(f"truncated XLBox at offset {pos}")
            (lbox,) = struct.unpack_from(">Q", data, pos + 8)
            header = 16
        elif lbox == 0:
            lbox = end - pos
        if lbox < header:
            raise MalformedBox(f"box length {lbox} underflows its header at offset {pos}")
        if pos + lbox > end:
            raise MalformedBox(f"box at offset {pos} overflows its parent by {pos + lbox - end} bytes")
        try:
            type_code = tbox.decode("ascii")
        except UnicodeDecodeError:
            raise MalformedBox(f"non-ASCII box type at offset {pos}") from None
        p0, p1 = pos + header, pos + lbox
        if type_code == "jumb":
            children = parse_boxes(data, p0, p1)
            if not children or children[0].type_code != "jumd":
                raise MalformedBox(f"superbox at offset {pos} lacks a leading description box")
            desc = children[0]
            boxes.append(
                JumbfBox(lbox, type_code, p0, p1 - p0, desc.label, desc.box_uuid, tuple(children))
            )
        elif type_code == "jumd":
            box_uuid, label = _parse_description(data[p0:p1], pos)
            boxes.append(JumbfBox(lbox, type_code, p0, p1 - p0, label, box_uuid))
        else:
            boxes.append(JumbfBox(lbox, type_code, p0, p1 - p0, content=data[p0:p1]))
        pos += lbox
    return boxes


def _parse_description(payload: bytes, where: int):
    if len(payload) < 17:
        raise MalformedBox(f"description box at offset {where} too short")
    box_uuid, toggles = payload[:16], payload[16]
    label = None
    if toggles & 0x02:
        term = payload.find(b"\x00", 17)
        if term < 0:
            raise MalformedBox(f"unterminated label in description box at offset {where}")
        label = payload[17:term].decode("utf-8", errors="replace")
    return box_uuid, label


def parse_manifest_store(jumbf: bytes) -> tuple[list[JumbfBox], bool, tuple[str, ...]]:
    """Boxes, manifest presence and the labels of every superbox under a C2PA store."""
    if not jumbf:
        raise MalformedBox("empty JUMBF stream")
    boxes = parse_boxes(jumbf)
    stores = [b for b in boxes if b.is_superbox and (b.label or "").startswith("c2pa")]
    labels = []
    for store in stores:
        for child in store.children:
            for box in child.walk():
                if box.is_superbox and box.label is not None:
                    labels.append(box.label)
    return boxes, bool(stores), tuple(labels)


# -- hard binding -----------------------------------------------------------


def _find_data_hash(boxes) -> JumbfBox | None:
    for top in boxes:
        for box in top.walk():
            if box.is_superbox and (box.label or "").startswith(DATA_HASH_LABEL):
                return box
    return None


def verify_hard_binding(blob: FileBlob, boxes) -> HardBinding:
    assertion = _find_data_hash(boxes)
    if assertion is None:
        return HardBinding.MISSING
    content = assertion.content_box()
    if content is None:
        return HardBinding.UNSUPPORTED
    try:
        if content.type_code == "cbor":
            doc = cbor2.loads(content.content)
        elif content.type_code == "json":
            doc = json.loads(content.content)
            if isinstance(doc.get("hash"), str):
                doc["hash"] = bytes.fromhex(doc["hash"])
        else:
            return HardBinding.UNSUPPORTED
    except Exception:  # any decoder failure means the format is not understood
        return HardBinding.UNSUPPORTED
    if not isinstance(doc, dict) or not isinstance(doc.get("hash"), bytes):
        return HardBinding.UNSUPPORTED
    hasher = _HASHES.get(doc.get("alg", "sha256"))
    if hasher is None:
        return HardBinding.UNSUPPORTED
    try:
        ranges = sorted((int(x["start"]), int(x["length"])) for x in doc.get("exclusions", []))
    except (KeyError, TypeError, ValueError):
        return HardBinding.UNSUPPORTED
    digest = hash_with_exclusions(blob.data, ranges, hasher)
    if digest is None:
        return HardBinding.INVALID
    return HardBinding.VALID if hmac.compare_digest(digest, doc["hash"]) else HardBinding.INVALID


def hash_with_exclusions(data: bytes, ranges, hasher=hashlib.sha256) -> bytes | None:
    """Digest of ``data`` with the (start, length) ranges omitted; None if a range is out of bounds."""
    h = hasher()
    pos = 0
    for start, length in ranges:
        if start < pos or length < 0 or start + length > len(data):
            return None
        h.update(data[pos:start])
        pos = start + length
    h.update(data[pos:])
    return h.digest()


def probe_c2pa(blob: FileBlob, cmap: ContainerMap | None = None) -> ManifestFinding:
    """Locate, parse and hash-check any manifest store.  Errors end up in ``error``."""
    try:
        streams = locate_jumbf(blob, cmap)
    except FragmentGap as exc:
        return ManifestFinding(False, error=f"FragmentGap: {exc}")
    errors = []
    for stream in streams:
        try:
            boxes, present, labels = parse_manifest_store(stream.data)
        except MalformedBox as exc:
            errors.append(f"MalformedBox: {exc}")
            continue
        if present:
            return ManifestFinding(True, labels, verify_hard_binding(blob, boxes))
    return ManifestFinding(False, error="; ".join(errors) or None)


# -- fixture writer ---------------------------------------------------------
# Produces minimal *unsigned* manifest stores for tests and synthetic
# corpora.  They are not conformant C2PA and must not be used as such.


def box(type_code: str, payload: bytes) -> bytes:
    return struct.pack(">I", 8 + len(payload)) + type_code.encode("ascii") + payload


def superbox(box_uuid: bytes, label: str, *children: bytes) -> bytes:
    desc = box("jumd", box_uuid + b"\x03" + label.encode("utf-8") + b"\x00")
    return box("jumb", desc + b"".join(children))


def _cbor_assertion(label: str, doc) -> bytes:
    return superbox(CBOR_UUID, label, box("cbor", cbor2.dumps(doc, canonical=True)))


def build_manifest_store(
    claim_generator: str,
    exclusions: list[tuple[int, int]],
    digest: bytes,
    manifest_id: str,
    digital_source_type: str = "http://cv.iptc.org/newscodes/digitalsourcetype/trainedAlgorithmicMedia",
    include_data_hash: bool = True,
) -> bytes:
    assertions = [
        _cbor_assertion(
            "c2pa.actions",
            {"actions": [{"action": "c2pa.created", "digitalSourceType": digital_source_type}]},
        )
    ]
    if include_data_hash:
        assertions.append(
            _cbor_assertion(
                DATA_HASH_LABEL,
                {
                    "exclusions": [{"start": s, "length": n} for s, n in exclusions],
                    "name": "jumbf manifest",
                    "alg": "sha256",
                    "hash": digest,
                    "pad": b"",
                },
            )
        )
    claim = {
        "claim_generator": claim_generator,
        "signature": "self#jumbf=c2pa.signature",
        "assertions": ["self#jumbf=c2pa.assertions/c2pa.actions"]
        + (["self#jumbf=c2pa.assertions/c2pa.hash.data"] if include_data_hash else []),
        "alg": "sha256",
        "note": "unsigned test fixture",
    }
    manifest = superbox(
        MANIFEST_UUID,
        manifest_id,
        superbox(ASSERTION_STORE_UUID, "c2pa.assertions", *assertions),
        superbox(CLAIM_UUID, "c2pa.claim", box("cbor", cbor2.dumps(claim, canonical=True))),
        superbox(SIGNATURE_UUID, "c2pa.signature", box("cbor", cbor2.dumps(b"", canonical=True))),
    )
    return superbox(STORE_UUID, "c2pa", manifest)


def _jpeg_app11(jumbf: bytes, max_fragment: int) -> bytes:
    header = jumbf[: _box_header_size(jumbf)]
    first, rest = jumbf[:max_fragment], jumbf[max_fragment:]
    fragments = [first]
    step = max_fragment - len(header)
    for i in range(0, len(rest), step):
        fragments.append(header + rest[i : i + step])
    out = b""
    for seq, frag in enumerate(fragments, start=1):
        out += jpeg_segment(0xEB, b"JP" + struct.pack(">HI", 1, seq) + frag)
    return out


def embed_test_manifest(
    blob: FileBlob,
    claim_generator: str = "markinspect-fixture",
    manifest_id: str | None = None,
    include_data_hash: bool = True,
    max_fragment: int = 65000,
) -> FileBlob:
    """Insert an unsigned manifest store whose data hash binds the rest of the file."""
    cmap = parse_containers(blob)
    manifest_id = manifest_id or f"urn:uuid:{uuid.uuid5(uuid.NAMESPACE_URL, claim_generator)}"
    if cmap.format is ImageFormat.PNG:
        kept = [e for e in cmap.entries if e.type_code != "caBX"]
        head = cmap.serialize(kept[:1])
        tail = b"".join(cmap.raw(e) for e in kept[1:])

        def carrier(jumbf):
            return png_chunk("caBX", jumbf)
    else:
        kept = [e for e in cmap.entries if e.type_code != 0xEB]
        i = 1
        while i < len(kept) and 0xE0 <= kept[i].type_code <= 0xEF:
            i += 1
        head = b"".join(cmap.raw(e) for e in kept[:i])
        tail = b"".join(cmap.raw(e) for e in kept[i:])

        def carrier(jumbf):
            return _jpeg_app11(jumbf, max_fragment)

    placeholder = b"\x00" * 32
    length = 0
    for _ in range(8):  # CBOR integer widths change with the range; iterate to a fixed point
        store = build_manifest_store(claim_generator, [(len(head), length)], placeholder, manifest_id, include_data_hash=include_data_hash)
        new_length = len(carrier(store))
        if new_length == length:
            break
        length = new_length
    digest = hashlib.sha256(head + tail).digest()
    store = build_manifest_store(claim_generator, [(len(head), length)], digest, manifest_id, include_data_hash=include_data_hash)
    block = carrier(store)
    assert len(block) == length
    return FileBlob(head + block + tail)
