"""Minimal TIFF/EXIF reader: IFD0, the Exif sub-IFD and the GPS sub-IFD."""

from __future__ import annotations

import struct

from .records import MetadataRecord, Standard, warning

TAG_NAMES = {
    0x010E: "ImageDescription",
    0x010F: "Make",
    0x0110: "Model",
    0x0112: "Orientation",
    0x011A: "XResolution",
    0x011B: "YResolution",
    0x0128: "ResolutionUnit",
    0x0131: "Software",
    0x0132: "DateTime",
    0x013B: "Artist",
    0x8298: "Copyright",
    0x829A: "ExposureTime",
    0x829D: "FNumber",
    0x8822: "ExposureProgram",
    0x8827: "ISOSpeedRatings",
    0x9000: "ExifVersion",
    0x9003: "DateTimeOriginal",
    0x9004: "DateTimeDigitized",
    0x920A: "FocalLength",
    0x927C: "MakerNote",
    0x9286: "UserComment",
    0x9C9B: "XPTitle",
    0x9C9C: "XPComment",
    0x9C9D: "XPAuthor",
    0x9C9E: "XPKeywords",
    0x9C9F: "XPSubject",
    0xA001: "ColorSpace",
    0xA002: "PixelXDimension",
    0xA003: "PixelYDimension",
    0xA430: "CameraOwnerName",
    0xA433: "LensMake",
    0xA434: "LensModel",
}
EXIF_IFD = 0x8769
GPS_IFD = 0x8825
INTEROP_IFD = 0xA005
_POINTERS = {EXIF_IFD, GPS_IFD, INTEROP_IFD}
_XP_TAGS = {0x9C9B, 0x9C9C, 0x9C9D, 0x9C9E, 0x9C9F}

# type id -> (struct code, byte size)
_TYPES = {
    1: ("B", 1),
    2: ("s", 1),
    3: ("H", 2),
    4: ("I", 4),
    5: ("II", 8),
    6: ("b", 1),
    7: ("s", 1),
    8: ("h", 2),
    9: ("i", 4),
    10: ("ii", 8),
    11: ("f", 4),
    12: ("d", 8),
}


def tag_name(tag: int) -> str:
    return TAG_NAMES.get(tag, f"Tag0x{tag:04X}")


def parse_tiff(data: bytes) -> list[MetadataRecord]:
    """Records for every tag in IFD0 and its Exif/GPS sub-IFDs."""
    if len(data) < 8:
        return [warning("EXIF", "TIFF header truncated")]
    if data[:4] == b"II*\x00":
        bo = "<"
    elif data[:4] == b"MM\x00*":
        bo = ">"
    else:
        return [warning("EXIF", "missing TIFF header")]
    records: list[MetadataRecord] = []
    (ifd0,) = struct.unpack_from(bo + "I", data, 4)
    seen: set[int] = set()
    queue = [("IFD0", ifd0)]
    while queue:
        name, offset = queue.pop(0)
        if offset in seen:
            records.append(warning("EXIF", f"{name} loops back to offset {offset}"))
            continue
        seen.add(offset)
        try:
            entries = _read_ifd(data, offset, bo)
        except (struct.error, ValueError) as exc:
            records.append(warning("EXIF", f"{name} unreadable: {exc}"))
            continue
        for tag, typ, count, raw in entries:
            if tag in _POINTERS:
                if tag != INTEROP_IFD:
                    sub = "ExifIFD" if tag == EXIF_IFD else "GPS"
                    queue.append((sub, struct.unpack(bo + "I", raw[:4])[0]))
                continue
            try:
                value = _format_value(tag, typ, count, raw, bo)
            except (struct.error, ValueError, UnicodeDecodeError) as exc:
                records.append(warning("EXIF", f"{tag_name(tag)}: {exc}"))
                continue
            key = tag_name(tag) if name != "GPS" else f"GPS{tag_name(tag)}"
            records.append(MetadataRecord(Standard.EXIF, key, value))
    return records


def _read_ifd(data: bytes, offset: int, bo: str):
    if offset < 8 or offset + 2 > len(data):
        raise ValueError(f"IFD offset {offset} out of range")
    (count,) = struct.unpack_from(bo + "H", data, offset)
    if offset + 2 + 12 * count > len(data):
        raise ValueError(f"IFD at {offset} truncated")
    out = []
    for i in range(count):
        pos = offset + 2 + 12 * i
        tag, typ, n = struct.unpack_from(bo + "HHI", data, pos)
        if typ not in _TYPES:
            continue
        size = _TYPES[typ][1] * n
        if size <= 4:
            raw = data[pos + 8 : pos + 8 + size]
        else:
            (voff,) = struct.unpack_from(bo + "I", data, pos + 8)
            if voff + size > len(data):
                raise ValueError(f"tag 0x{tag:04X} value runs past end of block")
            raw = data[voff : voff + size]
        out.append((tag, typ, n, raw))
    return out


def _format_value(tag: int, typ: int, count: int, raw: bytes, bo: str) -> str:
    if tag == 0x927C:
        return f"<{len(raw)} bytes opaque>"
    if typ == 2:
        return raw.split(b"\x00", 1)[0].decode("utf-8", errors="replace").strip()
    if tag in _XP_TAGS:
        return raw.decode("utf-16-le", errors="replace").rstrip("\x00")
    if tag == 0x9286:
        return _user_comment(raw)
    if typ == 7 or (typ == 1 and count > 4):
        if tag == 0x9000 or all(32 <= b < 127 for b in raw):
            return raw.decode("ascii").rstrip("\x00 ")
        return raw.hex() if len(raw) <= 32 else f"<{len(raw)} bytes>"
    code, size = _TYPES[typ]
    values = []
    for i in range(count):
        chunk = raw[i * size : (i + 1) * size]
        if typ in (5, 10):
            num, den = struct.unpack(bo + code, chunk)
            values.append(f"{num}/{den}")
        else:
            v = struct.unpack(bo + code, chunk)[0]
            values.append(repr(v) if isinstance(v, float) else str(v))
    return " ".join(values)


def _user_comment(raw: bytes) -> str:
    prefix, body = raw[:8], raw[8:]
    if prefix.startswith(b"UNICODE"):
        enc = "utf-16-be" if body[:1] == b"\x00" else "utf-16-le"
        return body.decode(enc, errors="replace").rstrip("\x00 ")
    return body.decode("utf-8", errors="replace").rstrip("\x00 ")
