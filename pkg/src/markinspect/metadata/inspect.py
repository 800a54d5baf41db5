"""Record extraction, AI-origin classification, XMP embedding and stripping."""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from ..blob import FileBlob, ImageFormat
from ..containers import ContainerMap, ContainerEntry, jpeg_segment, parse_containers, png_chunk
from ..errors import UnsupportedFormat
from .exif import parse_tiff
from .iptc import PHOTOSHOP_SIGNATURE, parse_photoshop_irb
from .records import MetadataRecord, Standard, warning
from .xmp import DigitalSourceDeclaration, build_xmp_packet, parse_xmp

RULES_VERSION = "ai-origin-rules/1"

XMP_KEYWORD = "XML:com.adobe.xmp"
EXIF_SIGNATURE = b"Exif\x00\x00"
XMP_SIGNATURE = b"http://ns.adobe.com/xap/1.0/\x00"
XMP_EXT_SIGNATURE = b"http://ns.adobe.com/xmp/extension/\x00"
JPEG_XT_ID = b"JP"

# chunks/segments needed to reproduce decoded pixels
PNG_KEEP = {"IHDR", "PLTE", "tRNS", "IDAT", "IEND"}
JPEG_KEEP = {
    0xD8, 0xD9, 0xDA, 0xDB, 0xC4, 0xCC, 0xDD, 0xDC,
    0xC0, 0xC1, 0xC2, 0xC3, 0xC5, 0xC6, 0xC7, 0xC9, 0xCA, 0xCB, 0xCD, 0xCE, 0xCF,
    *range(0xD0, 0xD8),
}

# key fragments naming the producer of an image (matched on the key's local name)
CREATOR_FIELDS = ("creator", "contributor", "software", "description", "by-line", "artist", "author")


def _require_container(blob: FileBlob) -> ContainerMap:
    if blob.format is ImageFormat.UNKNOWN:
        raise UnsupportedFormat("not a PNG or JPEG stream")
    return parse_containers(blob)


def extract_records(blob: FileBlob) -> list[MetadataRecord]:
    """All metadata records in file order.  Malformed blocks yield Warning records."""
    cmap = _require_container(blob)
    if cmap.format is ImageFormat.PNG:
        return _png_records(cmap)
    return _jpeg_records(cmap)


def _png_records(cmap: ContainerMap) -> list[MetadataRecord]:
    out: list[MetadataRecord] = []
    for e in cmap.entries:
        data = cmap.payload(e)
        t = e.type_code
        try:
            if t == "tEXt":
                key, _, text = data.partition(b"\x00")
                out.append(_png_text(key.decode("latin-1"), text.decode("latin-1")))
            elif t == "zTXt":
                key, _, rest = data.partition(b"\x00")
                if rest[:1] != b"\x00":
                    raise ValueError("unknown zTXt compression method")
                text = zlib.decompress(rest[1:]).decode("latin-1")
                out.append(_png_text(key.decode("latin-1"), text))
            elif t == "iTXt":
                out.extend(_itxt_records(data))
            elif t == "eXIf":
                out.extend(parse_tiff(data))
            elif t == "caBX":
                out.append(MetadataRecord(Standard.C2PA_POINTER, "caBX", f"{len(data)} bytes"))
        except (ValueError, zlib.error, UnicodeDecodeError) as exc:
            out.append(warning(f"PNG {t}@{e.offset}", str(exc)))
    return out


def _png_text(key: str, text: str) -> MetadataRecord:
    return MetadataRecord(Standard.PNG_TEXT, key or "(empty)", text)


def _itxt_records(data: bytes) -> list[MetadataRecord]:
    key, _, rest = data.partition(b"\x00")
    if len(rest) < 2:
        raise ValueError("iTXt chunk truncated")
    compressed, method = rest[0], rest[1]
    _lang, _, rest = rest[2:].partition(b"\x00")
    _tkey, _, text = rest.partition(b"\x00")
    if compressed:
        if method != 0:
            raise ValueError("unknown iTXt compression method")
        text = zlib.decompress(text)
    keyword = key.decode("latin-1")
    if keyword == XMP_KEYWORD:
        return parse_xmp(text)
    return [_png_text(keyword, text.decode("utf-8"))]


def _jpeg_records(cmap: ContainerMap) -> list[MetadataRecord]:
    out: list[MetadataRecord] = []
    seen_jumbf: set[bytes] = set()
    for e in cmap.entries:
        data = cmap.payload(e)
        m = e.type_code
        if m == 0xE1 and data.startswith(EXIF_SIGNATURE):
            out.extend(parse_tiff(data[len(EXIF_SIGNATURE) :]))
        elif m == 0xE1 and data.startswith(XMP_SIGNATURE):
            out.extend(parse_xmp(data[len(XMP_SIGNATURE) :]))
        elif m == 0xED and data.startswith(PHOTOSHOP_SIGNATURE):
            out.extend(parse_photoshop_irb(data))
        elif m == 0xEB and data.startswith(JPEG_XT_ID) and len(data) >= 8:
            instance = data[2:4]
            if instance not in seen_jumbf:
                seen_jumbf.add(instance)
                n = int.from_bytes(instance, "big")
                out.append(MetadataRecord(Standard.C2PA_POINTER, "APP11", f"JUMBF instance {n}"))
    return out


@dataclass(frozen=True)
class RuleConfig:
    terms: tuple[str, ...] = ("AI", "DALL-E", "Stable Diffusion", "Midjourney", "generated")
    enable_heuristics: bool = True

    @classmethod
    def from_json(cls, text: str) -> "RuleConfig":
        doc = json.loads(text)
        return cls(
            terms=tuple(doc.get("terms", cls.terms)),
            enable_heuristics=bool(doc.get("enable_heuristics", True)),
        )

    @classmethod
    def load(cls, path: str | Path | None = None) -> "RuleConfig":
        if path is None:
            text = resources.files("markinspect").joinpath("data/default_rules.json").read_text("utf-8")
        else:
            text = Path(path).read_text(encoding="utf-8")
        return cls.from_json(text)

    def to_dict(self) -> dict:
        return {"terms": list(self.terms), "enable_heuristics": self.enable_heuristics}


@dataclass(frozen=True)
class AiOriginFinding:
    is_ai_declared: bool
    matched_rules: tuple[tuple[str, MetadataRecord], ...] = ()
    confidence: str | None = None  # "Explicit" or "Heuristic"
    rules_version: str = RULES_VERSION

    def to_dict(self) -> dict:
        return {
            "is_ai_declared": self.is_ai_declared,
            "confidence": self.confidence,
            "rules_version": self.rules_version,
            "matched_rules": [{"rule": r, "record": rec.to_dict()} for r, rec in self.matched_rules],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AiOriginFinding":
        return cls(
            d["is_ai_declared"],
            tuple((m["rule"], MetadataRecord.from_dict(m["record"])) for m in d["matched_rules"]),
            d["confidence"],
            d["rules_version"],
        )


def classify_ai_origin(records, config: RuleConfig | None = None) -> AiOriginFinding:
    """Apply rules R1 (DigitalSourceType), R2 (C2PA pointer), R3 (creator-field terms)."""
    config = config or RuleConfig()
    terms = [t.lower() for t in config.terms]
    matched: list[tuple[str, MetadataRecord]] = []
    for rec in records:
        if (
            rec.standard in (Standard.XMP, Standard.IPTC)
            and rec.local_name == "DigitalSourceType"
            and rec.value.strip().lower().endswith("trainedalgorithmicmedia")
        ):
            matched.append(("R1", rec))
        elif rec.standard is Standard.C2PA_POINTER:
            matched.append(("R2", rec))
        elif config.enable_heuristics and rec.standard is not Standard.WARNING:
            name = rec.local_name.lower()
            value = rec.value.lower()
            if any(f in name for f in CREATOR_FIELDS) and any(t in value for t in terms):
                matched.append(("R3", rec))
    if not matched:
        return AiOriginFinding(False)
    explicit = any(rule in ("R1", "R2") for rule, _ in matched)
    return AiOriginFinding(True, tuple(matched), "Explicit" if explicit else "Heuristic")


def _is_xmp_entry(cmap: ContainerMap, e: ContainerEntry) -> bool:
    data = cmap.payload(e)
    if cmap.format is ImageFormat.PNG:
        return e.type_code == "iTXt" and data.startswith(XMP_KEYWORD.encode("latin-1") + b"\x00")
    return e.type_code == 0xE1 and (data.startswith(XMP_SIGNATURE) or data.startswith(XMP_EXT_SIGNATURE))


def embed_ai_metadata(blob: FileBlob, declaration: DigitalSourceDeclaration) -> FileBlob:
    """Write a single XMP packet declaring AI origin, replacing any existing XMP."""
    cmap = _require_container(blob)
    packet = build_xmp_packet(declaration)
    kept = [e for e in cmap.entries if not _is_xmp_entry(cmap, e)]
    if cmap.format is ImageFormat.PNG:
        itxt = XMP_KEYWORD.encode("latin-1") + b"\x00\x00\x00\x00\x00" + packet
        new = png_chunk("iTXt", itxt)
        parts = [cmap.raw(kept[0]), new] + [cmap.raw(e) for e in kept[1:]]
        return FileBlob(cmap.serialize([]) + b"".join(parts))
    new = jpeg_segment(0xE1, XMP_SIGNATURE + packet)
    # after SOI and any leading JFIF/Exif application segments
    i = 1
    while i < len(kept) and (
        kept[i].type_code == 0xE0
        or (kept[i].type_code == 0xE1 and cmap.payload(kept[i]).startswith(EXIF_SIGNATURE))
    ):
        i += 1
    parts = [cmap.raw(e) for e in kept[:i]] + [new] + [cmap.raw(e) for e in kept[i:]]
    return FileBlob(b"".join(parts))


def strip_metadata(blob: FileBlob) -> FileBlob:
    """Drop every block not needed to decode pixels (text, EXIF, XMP, IPTC, C2PA, ICC)."""
    cmap = _require_container(blob)
    if cmap.format is ImageFormat.PNG:
        parts = [cmap.raw(e) for e in cmap.entries if e.type_code in PNG_KEEP and e.type_code != "IEND"]
        return FileBlob(cmap.serialize([]) + b"".join(parts) + png_chunk("IEND", b""))
    parts = []
    for e in cmap.entries:
        m = e.type_code
        data = cmap.payload(e)
        if m == 0xD9:
            parts.append(b"\xff\xd9")
        elif m in JPEG_KEEP:
            parts.append(cmap.raw(e))
        elif m == 0xE0 and data.startswith(b"JFIF\x00"):
            parts.append(cmap.raw(e))
        elif m == 0xEE and data.startswith(b"Adobe"):
            parts.append(cmap.raw(e))  # colour transform flag affects decoding
    return FileBlob(b"".join(parts))
