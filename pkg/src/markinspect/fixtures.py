"""Constructed PNG/JPEG files exercising every metadata carrier the parsers know."""

from __future__ import annotations

import struct
import zlib

import numpy as np

from .blob import FileBlob
from .containers import jpeg_segment, parse_containers, png_chunk
from .image import RasterImage, encode_raster
from .metadata.exif import EXIF_IFD
from .metadata.iptc import build_iim, build_photoshop_irb
from .metadata.inspect import EXIF_SIGNATURE, XMP_KEYWORD, XMP_SIGNATURE
from .metadata.xmp import DigitalSourceDeclaration, build_xmp_packet
from .c2pa import embed_test_manifest

ASCII, SHORT, LONG = 2, 3, 4


def build_tiff(ifd0: list, exif: list | None = None, byte_order: str = "II") -> bytes:
    """TIFF stream with IFD0 and an optional Exif sub-IFD.

    Entries are (tag, type, value) where value is ``str`` for ASCII or ``int``
    for SHORT/LONG.  Values longer than four bytes go to a data area after
    each IFD.
    """
    bo = "<" if byte_order == "II" else ">"
    ifd0 = list(ifd0)
    if exif:
        ifd0.append((EXIF_IFD, LONG, 0))  # patched below
    ifd0.sort(key=lambda e: e[0])

    def ifd_size(entries):
        return 2 + 12 * len(entries) + 4

    def encode(entries, base, exif_offset=None):
        table = struct.pack(bo + "H", len(entries))
        area = b""
        data_at = base + ifd_size(entries)
        for tag, typ, value in entries:
            if tag == EXIF_IFD:
                value = exif_offset
            if typ == ASCII:
                raw = value.encode("ascii") + b"\x00"
            elif typ == SHORT:
                raw = struct.pack(bo + "H", value)
            else:
                raw = struct.pack(bo + "I", value)
            if len(raw) <= 4:
                table += struct.pack(bo + "HHI", tag, typ, len(raw) if typ == ASCII else 1)[:8]
                table += raw.ljust(4, b"\x00")
            else:
                table += struct.pack(bo + "HHII", tag, typ, len(raw), data_at + len(area))
                area += raw
                if len(area) % 2:
                    area += b"\x00"
        return table + struct.pack(bo + "I", 0) + area

    header = byte_order.encode("ascii") + struct.pack(bo + "HI", 42, 8)
    first = encode(ifd0, 8, exif_offset=0)
    if not exif:
        return header + first
    exif_offset = 8 + len(first)
    first = encode(ifd0, 8, exif_offset=exif_offset)
    return header + first + encode(exif, exif_offset)


def sample_tiff(byte_order: str) -> bytes:
    return build_tiff(
        [(0x010F, ASCII, "FixtureCam"), (0x0131, ASCII, "ExampleGen AI 2.1"), (0x0112, SHORT, 1)],
        [(0x9003, ASCII, "2024:01:02 03:04:05")],
        byte_order,
    )


def _base_image(width: int = 48, height: int = 32) -> RasterImage:
    y, x = np.mgrid[0:height, 0:width]
    rgb = np.stack([x * 5 % 256, y * 7 % 256, (x + y) * 3 % 256], axis=-1).astype(np.uint8)
    return RasterImage.from_array(rgb)


def _png_insert_after_ihdr(blob: FileBlob, *chunks: bytes) -> FileBlob:
    cmap = parse_containers(blob)
    head = cmap.serialize(cmap.entries[:1])
    tail = b"".join(cmap.raw(e) for e in cmap.entries[1:])
    return FileBlob(head + b"".join(chunks) + tail)


def _jpeg_insert_after_soi(blob: FileBlob, *segments: bytes) -> FileBlob:
    cmap = parse_containers(blob)
    entries = cmap.entries
    i = 1
    while i < len(entries) and entries[i].type_code == 0xE0:
        i += 1
    head = b"".join(cmap.raw(e) for e in entries[:i])
    tail = b"".join(cmap.raw(e) for e in entries[i:])
    return FileBlob(head + b"".join(segments) + tail)


def xmp_packet() -> bytes:
    return build_xmp_packet(DigitalSourceDeclaration("ExampleGen"))


def itxt_xmp(packet: bytes) -> bytes:
    return png_chunk("iTXt", XMP_KEYWORD.encode("latin-1") + b"\x00\x00\x00\x00\x00" + packet)


def iptc_segment(byline: str = "ExampleGen") -> bytes:
    iim = build_iim([(2, 80, byline.encode("utf-8")), (2, 5, b"Fixture title")])
    return jpeg_segment(0xED, build_photoshop_irb(iim))


def parser_fixtures() -> dict[str, FileBlob]:
    """Named fixture files, deterministic across runs."""
    img = _base_image()
    png = encode_raster(img, "PNG")
    jpg = encode_raster(img, "JPEG", quality=90)
    exif_le, exif_be = sample_tiff("II"), sample_tiff("MM")
    packet = xmp_packet()
    text_chunk = png_chunk("tEXt", b"Software\x00ExampleGen")
    ztxt_chunk = png_chunk("zTXt", b"Comment\x00\x00" + zlib.compress(b"made by a diffusion model"))
    return {
        "png_clean": png,
        "jpeg_clean": jpg,
        "png_exif_le": _png_insert_after_ihdr(png, png_chunk("eXIf", exif_le)),
        "png_exif_be": _png_insert_after_ihdr(png, png_chunk("eXIf", exif_be)),
        "jpeg_exif_le": _jpeg_insert_after_soi(jpg, jpeg_segment(0xE1, EXIF_SIGNATURE + exif_le)),
        "jpeg_exif_be": _jpeg_insert_after_soi(jpg, jpeg_segment(0xE1, EXIF_SIGNATURE + exif_be)),
        "png_xmp_itxt": _png_insert_after_ihdr(png, itxt_xmp(packet)),
        "jpeg_xmp_app1": _jpeg_insert_after_soi(jpg, jpeg_segment(0xE1, XMP_SIGNATURE + packet)),
        "jpeg_iptc_app13": _jpeg_insert_after_soi(jpg, iptc_segment()),
        "png_text": _png_insert_after_ihdr(png, text_chunk, ztxt_chunk),
        "png_c2pa_cabx": embed_test_manifest(png, "ExampleGen"),
        "jpeg_c2pa_split_app11": embed_test_manifest(jpg, "ExampleGen", max_fragment=400),
        "jpeg_all": _jpeg_insert_after_soi(
            jpg,
            jpeg_segment(0xE1, EXIF_SIGNATURE + exif_be),
            jpeg_segment(0xE1, XMP_SIGNATURE + packet),
            iptc_segment(),
        ),
        "png_trailing_bytes": FileBlob(png.data + b"trailing garbage"),
        "jpeg_trailing_bytes": FileBlob(jpg.data + b"\x00\x00tail"),
    }
