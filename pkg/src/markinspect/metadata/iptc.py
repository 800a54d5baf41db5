"""IPTC-IIM datasets inside a Photoshop image resource block (JPEG APP13)."""

from __future__ import annotations

import struct

from .records import MetadataRecord, Standard, warning

PHOTOSHOP_SIGNATURE = b"Photoshop 3.0\x00"
IPTC_RESOURCE_ID = 0x0404

RECORD2_NAMES = {
    0: "RecordVersion",
    5: "ObjectName",
    15: "Category",
    25: "Keywords",
    40: "SpecialInstructions",
    55: "DateCreated",
    60: "TimeCreated",
    65: "OriginatingProgram",
    80: "By-line",
    85: "By-lineTitle",
    90: "City",
    101: "Country-PrimaryLocationName",
    105: "Headline",
    110: "Credit",
    115: "Source",
    116: "CopyrightNotice",
    118: "Contact",
    120: "Caption-Abstract",
    122: "Writer-Editor",
}


def parse_photoshop_irb(data: bytes) -> list[MetadataRecord]:
    """Walk 8BIM resources after the ``Photoshop 3.0`` signature."""
    if not data.startswith(PHOTOSHOP_SIGNATURE):
        return [warning("IPTC", "APP13 block without Photoshop signature")]
    pos = len(PHOTOSHOP_SIGNATURE)
    records: list[MetadataRecord] = []
    while pos + 12 <= len(data):
        sig = data[pos : pos + 4]
        if sig != b"8BIM":
            records.append(warning("IPTC", f"unknown resource signature at {pos}"))
            break
        (rid,) = struct.unpack_from(">H", data, pos + 4)
        name_len = data[pos + 6]
        name_total = name_len + 1 + ((name_len + 1) % 2)
        p = pos + 6 + name_total
        if p + 4 > len(data):
            records.append(warning("IPTC", "resource header truncated"))
            break
        (size,) = struct.unpack_from(">I", data, p)
        start = p + 4
        if start + size > len(data):
            records.append(warning("IPTC", f"resource 0x{rid:04X} truncated"))
            break
        if rid == IPTC_RESOURCE_ID:
            records.extend(parse_iim(data[start : start + size]))
        pos = start + size + (size % 2)
    return records


def parse_iim(data: bytes) -> list[MetadataRecord]:
    """Record-2 datasets as ``IPTC`` records; other records are skipped."""
    records: list[MetadataRecord] = []
    pos = 0
    utf8 = False
    while pos < len(data):
        if data[pos] != 0x1C:
            if any(data[pos:]):  # zero padding is common
                records.append(warning("IPTC", f"bad dataset tag marker at {pos}"))
            break
        if pos + 5 > len(data):
            records.append(warning("IPTC", "dataset header truncated"))
            break
        rec, ds, length = data[pos + 1], data[pos + 2], struct.unpack_from(">H", data, pos + 3)[0]
        pos += 5
        if length & 0x8000:
            n = length & 0x7FFF
            if n > 4 or pos + n > len(data):
                records.append(warning("IPTC", "bad extended dataset length"))
                break
            length = int.from_bytes(data[pos : pos + n], "big")
            pos += n
        if pos + length > len(data):
            records.append(warning("IPTC", f"dataset {rec}:{ds} truncated"))
            break
        value = data[pos : pos + length]
        pos += length
        if rec == 1 and ds == 90:
            utf8 = value == b"\x1b%G"
        if rec != 2:
            continue
        key = RECORD2_NAMES.get(ds, f"2:{ds}")
        if ds == 0 and len(value) == 2:
            text = str(struct.unpack(">H", value)[0])
        else:
            text = _decode(value, utf8)
        records.append(MetadataRecord(Standard.IPTC, key, text))
    return records


def _decode(value: bytes, utf8: bool) -> str:
    if utf8:
        return value.decode("utf-8", errors="replace")
    try:
        return value.decode("utf-8")
    except UnicodeDecodeError:
        return value.decode("latin-1")


def build_iim(datasets: list[tuple[int, int, bytes]]) -> bytes:
    out = bytearray()
    for rec, ds, value in datasets:
        out += bytes((0x1C, rec, ds)) + struct.pack(">H", len(value)) + value
    return bytes(out)


def build_photoshop_irb(iim: bytes) -> bytes:
    res = b"8BIM" + struct.pack(">H", IPTC_RESOURCE_ID) + b"\x00\x00"
    res += struct.pack(">I", len(iim)) + iim + (b"\x00" if len(iim) % 2 else b"")
    return PHOTOSHOP_SIGNATURE + res
