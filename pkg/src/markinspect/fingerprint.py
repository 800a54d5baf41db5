"""64-bit DCT perceptual hash and an append-only NDJSON fingerprint store.

Store format, one JSON object per line (UTF-8, ``\\n`` terminated)::

    {"created_at": "2024-01-01T00:00:00Z", "hex_bits": "c3a1...", "label": "SYNTHGEN-A01"}

``hex_bits`` is the 64-bit hash as 16 lowercase hex digits, bit 0 being the
most significant bit (coefficient (0,1) in row-major order of the 8x8 block).
"""

from __future__ import annotations

import datetime as _dt
import json
import os
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import StoreIoFailure
from .image import RasterImage, resize_plane, rgb_to_luma
from .transforms import dct2

VERSION = "phash-dct32/1"
HASH_SIZE = 32
LOW_FREQ = 8
DEFAULT_MAX_DISTANCE = 10

# AC magnitudes below this (relative to the DC term) are float round-off
_ZERO_TOL = 1e-9


def compute_phash(img: RasterImage) -> int:
    """Bit i is set when AC coefficient i exceeds the median of the 63 AC terms."""
    plane = resize_plane(rgb_to_luma(img), HASH_SIZE, HASH_SIZE)
    coeffs = dct2(plane)[:LOW_FREQ, :LOW_FREQ].ravel()
    dc, ac = coeffs[0], coeffs[1:].copy()
    ac[np.abs(ac) <= _ZERO_TOL * (1.0 + abs(dc))] = 0.0
    median = np.median(ac)
    value = 0
    for bit in ac > median:
        value = (value << 1) | int(bit)
    return value


def hamming(a: int, b: int) -> int:
    return (a ^ b).bit_count()


def _utc_now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(frozen=True)
class Fingerprint:
    bits: int
    source_label: str
    created_at: str

    def __post_init__(self):
        if not 0 <= self.bits < 1 << 64:
            raise ValueError("fingerprint must fit in 64 bits")

    @property
    def hex_bits(self) -> str:
        return f"{self.bits:016x}"

    def to_json(self) -> str:
        return json.dumps(
            {"created_at": self.created_at, "hex_bits": self.hex_bits, "label": self.source_label},
            sort_keys=True,
            ensure_ascii=False,
        )

    @classmethod
    def from_json(cls, line: str) -> "Fingerprint":
        d = json.loads(line)
        return cls(int(d["hex_bits"], 16), d["label"], d["created_at"])


@dataclass(frozen=True)
class FingerprintMatch:
    record: Fingerprint
    distance: int
    index: int  # registration order

    def to_dict(self) -> dict:
        return {
            "label": self.record.source_label,
            "hex_bits": self.record.hex_bits,
            "distance": self.distance,
            "index": self.index,
        }


class RegistryStore:
    """Append-only fingerprint log.  ``path=None`` keeps records in memory only.

    One writer per file; appends from threads sharing this object are
    serialized by an internal lock, so the on-disk order equals the order in
    which ``append`` returned.
    """

    def __init__(self, path: str | Path | None = None, clock: Callable[[], str] = _utc_now):
        self.path = Path(path) if path is not None else None
        self.clock = clock
        self._lock = threading.Lock()
        self._records: list[Fingerprint] = []
        if self.path is not None and self.path.exists():
            self._records = self._read()

    def _read(self) -> list[Fingerprint]:
        try:
            text = self.path.read_text(encoding="utf-8")
        except OSError as exc:
            raise StoreIoFailure(f"cannot read store {self.path}: {exc}") from exc
        out = []
        for n, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                out.append(Fingerprint.from_json(line))
            except (ValueError, KeyError, TypeError) as exc:
                raise StoreIoFailure(f"{self.path}:{n}: bad record ({exc})") from exc
        return out

    @property
    def records(self) -> tuple[Fingerprint, ...]:
        return tuple(self._records)

    def __len__(self) -> int:
        return len(self._records)

    def append(self, bits: int, label: str, created_at: str | None = None) -> Fingerprint:
        with self._lock:
            record = Fingerprint(bits, label, created_at if created_at is not None else self.clock())
            if self.path is not None:
                try:
                    with open(self.path, "a", encoding="utf-8") as fh:
                        fh.write(record.to_json() + "\n")
                        fh.flush()
                        os.fsync(fh.fileno())
                except OSError as exc:
                    raise StoreIoFailure(f"cannot append to {self.path}: {exc}") from exc
            self._records.append(record)
            return record

    def reload(self) -> "RegistryStore":
        return RegistryStore(self.path, self.clock)


def register_fingerprint(
    store: RegistryStore, img: RasterImage, label: str, created_at: str | None = None
) -> Fingerprint:
    return store.append(compute_phash(img), label, created_at)


def match_bits(store: RegistryStore, bits: int, max_distance: int = DEFAULT_MAX_DISTANCE) -> FingerprintMatch | None:
    best = None
    for i, rec in enumerate(store.records):
        d = hamming(bits, rec.bits)
        if d <= max_distance and (best is None or d < best.distance):
            best = FingerprintMatch(rec, d, i)
    return best


def match_fingerprint(
    store: RegistryStore, img: RasterImage, max_distance: int = DEFAULT_MAX_DISTANCE
) -> FingerprintMatch | None:
    """Closest record within ``max_distance`` bits, earliest on ties; None means no match."""
    return match_bits(store, compute_phash(img), max_distance)
