"""Chunk/segment layout of PNG and JPEG files.

The map is lossless: every byte of the input belongs to exactly one entry
(the PNG signature excepted), so concatenating the entries reproduces the
file.  Bytes trailing IEND/EOI are folded into that final entry.
"""

from __future__ import annotations

import enum
import struct
import zlib
from dataclasses import dataclass, field
from typing import Iterable

from .blob import PNG_SIGNATURE, FileBlob, ImageFormat
from .errors import CorruptContainer, UnsupportedFormat


class EntryKind(str, enum.Enum):
    PNG_CHUNK = "PngChunk"
    JPEG_SEGMENT = "JpegSegment"


@dataclass(frozen=True)
class ContainerEntry:
    kind: EntryKind
    type_code: str | int  # 4-char chunk type for PNG, marker byte for JPEG
    offset: int
    length: int
    data_offset: int
    data_length: int

    @property
    def end(self) -> int:
        return self.offset + self.length

    def to_dict(self) -> dict:
        code = self.type_code
        if isinstance(code, int):
            code = f"0x{code:02X}"
        return {
            "kind": self.kind.value,
            "type_code": code,
            "offset": self.offset,
            "length": self.length,
        }


@dataclass(frozen=True)
class ContainerMap:
    format: ImageFormat
    entries: tuple[ContainerEntry, ...]
    source: bytes = field(repr=False, compare=False)

    def payload(self, entry: ContainerEntry) -> bytes:
        return self.source[entry.data_offset : entry.data_offset + entry.data_length]

    def raw(self, entry: ContainerEntry) -> bytes:
        return self.source[entry.offset : entry.end]

    def find(self, type_code: str | int) -> list[ContainerEntry]:
        return [e for e in self.entries if e.type_code == type_code]

    def serialize(self, entries: Iterable[ContainerEntry] | None = None) -> bytes:
        """Re-emit the file from (a subset of) its entries."""
        if entries is None:
            entries = self.entries
        head = PNG_SIGNATURE if self.format is ImageFormat.PNG else b""
        return head + b"".join(self.raw(e) for e in entries)


def parse_containers(blob: FileBlob) -> ContainerMap:
    if blob.format is ImageFormat.PNG:
        return ContainerMap(ImageFormat.PNG, tuple(_parse_png(blob.data)), blob.data)
    if blob.format is ImageFormat.JPEG:
        return ContainerMap(ImageFormat.JPEG, tuple(_parse_jpeg(blob.data)), blob.data)
    raise UnsupportedFormat("unrecognized magic bytes")


def _parse_png(data: bytes) -> list[ContainerEntry]:
    entries = []
    pos = len(PNG_SIGNATURE)
    n = len(data)
    while True:
        if pos + 8 > n:
            raise CorruptContainer(f"truncated PNG chunk header at offset {pos}")
        length, ctype = struct.unpack_from(">I4s", data, pos)
        if length > 0x7FFFFFFF:
            raise CorruptContainer(f"PNG chunk length {length} out of range at {pos}")
        if pos + 12 + length > n:
            raise CorruptContainer(f"truncated PNG chunk at offset {pos}")
        try:
            type_code = ctype.decode("ascii")
        except UnicodeDecodeError:
            raise CorruptContainer(f"non-ASCII chunk type at offset {pos}") from None
        if not type_code.isalpha():
            raise CorruptContainer(f"invalid chunk type {type_code!r} at {pos}")
        (crc,) = struct.unpack_from(">I", data, pos + 8 + length)
        if zlib.crc32(data[pos + 4 : pos + 8 + length]) != crc:
            raise CorruptContainer(f"CRC mismatch in {type_code} chunk at {pos}")
        if not entries and type_code != "IHDR":
            raise CorruptContainer("PNG does not start with IHDR")
        size = 12 + length
        if type_code == "IEND":
            size = n - pos
        entries.append(
            ContainerEntry(EntryKind.PNG_CHUNK, type_code, pos, size, pos + 8, length)
        )
        pos += size
        if type_code == "IEND":
            return entries


# markers without a length field
_STANDALONE = {0x01, *range(0xD0, 0xD8)}


def _parse_jpeg(data: bytes) -> list[ContainerEntry]:
    entries = [ContainerEntry(EntryKind.JPEG_SEGMENT, 0xD8, 0, 2, 2, 0)]
    pos = 2
    n = len(data)
    while True:
        start = pos
        if pos >= n:
            raise CorruptContainer("JPEG ends without EOI")
        if data[pos] != 0xFF:
            raise CorruptContainer(f"expected marker at offset {pos}")
        while pos < n and data[pos] == 0xFF:
            pos += 1  # fill bytes
        if pos >= n:
            raise CorruptContainer("JPEG ends inside a marker")
        marker = data[pos]
        pos += 1
        if marker == 0xD9:
            entries.append(
                ContainerEntry(EntryKind.JPEG_SEGMENT, marker, start, n - start, pos, 0)
            )
            return entries
        if marker in _STANDALONE:
            entries.append(
                ContainerEntry(EntryKind.JPEG_SEGMENT, marker, start, pos - start, pos, 0)
            )
            continue
        if marker == 0x00 or marker == 0xD8:
            raise CorruptContainer(f"unexpected marker 0x{marker:02X} at {pos - 1}")
        if pos + 2 > n:
            raise CorruptContainer(f"truncated segment length at offset {pos}")
        (seglen,) = struct.unpack_from(">H", data, pos)
        if seglen < 2 or pos + seglen > n:
            raise CorruptContainer(
                f"segment 0x{marker:02X} at {start} declares {seglen} bytes past end"
            )
        data_offset = pos + 2
        data_length = seglen - 2
        pos += seglen
        if marker == 0xDA:
            pos = _skip_entropy_coded(data, pos)
        entries.append(
            ContainerEntry(
                EntryKind.JPEG_SEGMENT, marker, start, pos - start, data_offset, data_length
            )
        )


def _skip_entropy_coded(data: bytes, pos: int) -> int:
    """Return the offset of the first real marker after scan data."""
    n = len(data)
    while True:
        pos = data.find(b"\xff", pos)
        if pos < 0 or pos + 1 >= n:
            raise CorruptContainer("scan data truncated before EOI")
        nxt = data[pos + 1]
        if nxt == 0x00 or 0xD0 <= nxt <= 0xD7 or nxt == 0xFF:
            # stuffed byte, restart marker, or fill byte preceding a marker
            if nxt == 0xFF:
                j = pos + 1
                while j < n and data[j] == 0xFF:
                    j += 1
                if j < n and data[j] != 0x00 and not 0xD0 <= data[j] <= 0xD7:
                    return pos
                pos = j
                continue
            pos += 2
            continue
        return pos


def png_chunk(type_code: str, payload: bytes) -> bytes:
    ctype = type_code.encode("ascii")
    return (
        struct.pack(">I", len(payload))
        + ctype
        + payload
        + struct.pack(">I", zlib.crc32(ctype + payload))
    )


def jpeg_segment(marker: int, payload: bytes) -> bytes:
    if len(payload) + 2 > 0xFFFF:
        raise ValueError(f"JPEG segment payload too large ({len(payload)} bytes)")
    return bytes((0xFF, marker)) + struct.pack(">H", len(payload) + 2) + payload
