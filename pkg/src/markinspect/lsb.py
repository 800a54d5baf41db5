"""Spatial least-significant-bit watermark with a CRC-checked frame.

Frame layout (big-endian, bits MSB first)::

    b"AIWM" | uint16 body length | body | uint32 CRC-32(magic+length+body)

Bits go into the LSBs of the colour samples in row-major, channel-interleaved
order starting at sample 0.  Alpha never carries bits.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

from .errors import CapacityExceeded, CorruptFrame, NotFound
from .image import RasterImage

VERSION = "lsb-frame/1"
MAGIC = b"AIWM"
HEADER_BYTES = len(MAGIC) + 2
OVERHEAD_BYTES = HEADER_BYTES + 4
MAX_BODY = 0xFFFF


def build_frame(payload: bytes) -> bytes:
    if len(payload) > MAX_BODY:
        raise CapacityExceeded((len(payload) + OVERHEAD_BYTES) * 8, MAX_BODY * 8)
    head = MAGIC + struct.pack(">H", len(payload)) + payload
    return head + struct.pack(">I", zlib.crc32(head))


def _color_samples(img: RasterImage) -> np.ndarray:
    return img.samples[:, :, : img.channels.color_count].reshape(-1)


def capacity_bits(img: RasterImage) -> int:
    return img.width * img.height * img.channels.color_count


def lsb_embed(img: RasterImage, payload: bytes) -> RasterImage:
    bits = np.unpackbits(np.frombuffer(build_frame(payload), dtype=np.uint8))
    available = capacity_bits(img)
    if bits.size > available:
        raise CapacityExceeded(int(bits.size), available)
    samples = np.array(img.samples)
    ncol = img.channels.color_count
    color = samples[:, :, :ncol].reshape(-1)
    color[: bits.size] = (color[: bits.size] & 0xFE) | bits
    samples[:, :, :ncol] = color.reshape(img.height, img.width, ncol)
    return img.with_samples(samples)


def read_lsb_bytes(img: RasterImage, count: int) -> bytes:
    """First ``count`` bytes of the LSB stream (fewer if the image is small)."""
    n = min(count * 8, capacity_bits(img)) // 8 * 8
    return np.packbits(_color_samples(img)[:n] & 1).tobytes()


def lsb_extract(img: RasterImage) -> bytes:
    head = read_lsb_bytes(img, HEADER_BYTES)
    if len(head) < HEADER_BYTES or head[:4] != MAGIC:
        raise NotFound("no LSB frame magic at offset 0")
    (length,) = struct.unpack(">H", head[4:6])
    total = HEADER_BYTES + length + 4
    frame = read_lsb_bytes(img, total)
    if len(frame) < total:
        raise CorruptFrame(f"frame declares {length} bytes but image is too small")
    (crc,) = struct.unpack(">I", frame[-4:])
    if zlib.crc32(frame[:-4]) != crc:
        raise CorruptFrame("LSB frame CRC mismatch")
    return frame[HEADER_BYTES:-4]


def frame_bit_error_rate(img: RasterImage, payload: bytes) -> float:
    """Fraction of frame bits in the LSB stream that differ from the expected frame."""
    expected = np.unpackbits(np.frombuffer(build_frame(payload), dtype=np.uint8))
    got = _color_samples(img)[: expected.size] & 1
    if got.size < expected.size:
        return 1.0
    return float(np.mean(got != expected))
