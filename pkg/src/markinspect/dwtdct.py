"""Keyless DWT-DCT watermark using quantisation index modulation.

The luma plane is split with a one-level Haar DWT; the LL band is cut into
4x4 tiles and one mid-band DCT coefficient per tile is snapped onto the
quantiser lattice of the bit it carries (``delta * Z`` for 0,
``delta * (Z + 1/2)`` for 1).  Tile ``b`` (row-major) carries payload bit
``b mod n_bits``; decoding takes a majority vote per bit.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from . import kernels
from .errors import BadParams, EmptyRegistry, ImageTooSmall
from .image import RasterImage, rgb_to_luma
from .transforms import SubbandSet, crop_even, dct_basis_pattern, haar_dwt2_forward, haar_dwt2_inverse

VERSION = "dwtdct-qim/1"
DEFAULT_BITS = 96

# Random 96-bit strings land within 19 bits of a fixed entry with
# probability sum_{i<=19} C(96, i) / 2^96 ~= 9.3e-10.
DEFAULT_MATCH_THRESHOLD = 0.20


@dataclass(frozen=True)
class DwtDctParams:
    delta: float = 8.0
    coeff_index: tuple[int, int] = (2, 1)
    block_size: int = 4

    def __post_init__(self):
        if not self.delta > 0:
            raise BadParams("delta must be positive")
        r, c = self.coeff_index
        if (r, c) == (0, 0):
            raise BadParams("the DC coefficient cannot carry watermark bits")
        if not (0 <= r < self.block_size and 0 <= c < self.block_size):
            raise BadParams(f"coeff_index {self.coeff_index} outside the block")

    def pattern(self) -> np.ndarray:
        return dct_basis_pattern(self.block_size, *self.coeff_index)

    def repetitions(self, width: int, height: int, n_bits: int) -> int:
        return block_count(width, height, self.block_size) // n_bits

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "coeff_index": list(self.coeff_index),
            "block_size": self.block_size,
        }


def block_count(width: int, height: int, block_size: int = 4) -> int:
    return ((height // 2) // block_size) * ((width // 2) // block_size)


def min_side(n_bits: int, block_size: int = 4) -> int:
    """Smallest square image side holding one tile per payload bit."""
    return 2 * block_size * math.ceil(math.sqrt(n_bits))


@dataclass(frozen=True, eq=False)
class WatermarkPayload:
    bits: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.bits, dtype=np.uint8).reshape(-1)
        if arr.size == 0 or np.any(arr > 1):
            raise BadParams("payload bits must be a non-empty 0/1 sequence")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "bits", arr)

    @classmethod
    def from_bytes(cls, data: bytes) -> "WatermarkPayload":
        return cls(np.unpackbits(np.frombuffer(data, dtype=np.uint8)))

    @classmethod
    def from_hex(cls, text: str) -> "WatermarkPayload":
        try:
            return cls.from_bytes(bytes.fromhex(text))
        except ValueError as exc:
            raise BadParams(f"bad hex payload: {exc}") from None

    def __len__(self) -> int:
        return int(self.bits.size)

    def to_bytes(self) -> bytes:
        return np.packbits(self.bits).tobytes()

    def hex(self) -> str:
        return self.to_bytes().hex()

    def __eq__(self, other):
        if not isinstance(other, WatermarkPayload):
            return NotImplemented
        return np.array_equal(self.bits, other.bits)

    def __hash__(self):
        return hash(self.bits.tobytes())


@dataclass(frozen=True)
class PayloadRegistry:
    entries: tuple[tuple[str, WatermarkPayload], ...]
    match_threshold: float = DEFAULT_MATCH_THRESHOLD

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        labels = [label for label, _ in self.entries]
        if len(set(labels)) != len(labels):
            raise BadParams("registry labels must be unique")
        if len({len(p) for _, p in self.entries}) > 1:
            raise BadParams("registry payloads must share one bit length")
        if not 0.0 <= self.match_threshold <= 1.0:
            raise BadParams("match_threshold must lie in [0, 1]")

    @property
    def bit_length(self) -> int:
        if not self.entries:
            raise EmptyRegistry("registry has no entries")
        return len(self.entries[0][1])

    def lookup(self, label: str) -> WatermarkPayload:
        for name, payload in self.entries:
            if name == label:
                return payload
        raise KeyError(label)

    def to_json(self) -> str:
        rows = [{"label": label, "payload": p.hex()} for label, p in self.entries]
        return json.dumps(rows, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str, match_threshold: float | None = None) -> "PayloadRegistry":
        doc = json.loads(text)
        threshold = DEFAULT_MATCH_THRESHOLD
        if isinstance(doc, dict):
            threshold = doc.get("match_threshold", threshold)
            doc = doc.get("entries", [])
        if match_threshold is not None:
            threshold = match_threshold
        entries = [(row["label"], WatermarkPayload.from_hex(row["payload"])) for row in doc]
        return cls(tuple(entries), threshold)

    @classmethod
    def load(cls, path: str | Path, match_threshold: float | None = None) -> "PayloadRegistry":
        return cls.from_json(Path(path).read_text(encoding="utf-8"), match_threshold)


@dataclass(frozen=True, eq=False)
class ExtractedBits:
    bits: np.ndarray
    confidence: np.ndarray  # |ones - zeros| / votes, per bit
    votes: int  # tiles contributing to the least-voted bit


@dataclass(frozen=True)
class DetectionResult:
    detected: bool
    label: str | None = None
    distance_fraction: float = 1.0
    detector: str = VERSION
    details: dict = field(default_factory=dict, compare=False)

    def to_dict(self) -> dict:
        return {
            "detected": self.detected,
            "label": self.label,
            "distance_fraction": self.distance_fraction,
            "detector": self.detector,
        }


def _luma_ll(img: RasterImage):
    luma = crop_even(rgb_to_luma(img))
    if luma.size == 0:
        raise ImageTooSmall("image has no even-sized region", 2, 2)
    return luma, haar_dwt2_forward(luma)


def _check_size(img: RasterImage, n_bits: int, params: DwtDctParams) -> None:
    have = block_count(img.width, img.height, params.block_size)
    if have < n_bits:
        side = min_side(n_bits, params.block_size)
        raise ImageTooSmall(
            f"{img.width}x{img.height} image has {have} tiles for {n_bits} bits", side, side
        )


def _bit_per_tile(tiles_shape, n_bits: int) -> np.ndarray:
    ty, tx = tiles_shape
    return (np.arange(ty * tx) % n_bits).reshape(ty, tx)


def quantize_to_coset(q: np.ndarray, bits: np.ndarray, delta: float) -> np.ndarray:
    off = 0.5 * bits
    return delta * (np.floor(q / delta - off + 0.5) + off)


def embed_ll(ll: np.ndarray, payload: WatermarkPayload, params: DwtDctParams) -> np.ndarray:
    """Return the LL band with every tile's carrier coefficient on its bit's coset."""
    pattern = params.pattern()
    q = kernels.block_coefficients(np.ascontiguousarray(ll), pattern)
    tile_bits = payload.bits[_bit_per_tile(q.shape, len(payload))]
    shifts = quantize_to_coset(q, tile_bits, params.delta) - q
    return kernels.shift_block_coefficients(np.ascontiguousarray(ll), shifts, pattern)


def dwtdct_embed(
    img: RasterImage, payload: WatermarkPayload, params: DwtDctParams | None = None
) -> RasterImage:
    """Embed ``payload`` into the luma of ``img``; chroma is left unchanged.

    The luma change is applied equally to R, G and B.  Plain rounding of a
    sub-count change would cancel most of a tile's coefficient shift, so the
    rounding is done by ``kernels.round_luma_shift``, which keeps each tile's
    carrier coefficient at its unrounded value to within a fraction of a count.
    """
    params = params or DwtDctParams()
    _check_size(img, len(payload), params)
    luma, sb = _luma_ll(img)
    marked_ll = embed_ll(sb.ll, payload, params)
    new_luma = haar_dwt2_inverse(SubbandSet(marked_ll, sb.lh, sb.hl, sb.hh))
    dy = new_luma - luma
    h, w = luma.shape
    ncol = img.channels.color_count
    samples = np.array(img.samples)
    color = samples[:h, :w, :ncol].astype(np.int64)
    up = (255 - color.max(axis=2)).astype(np.float64)
    down = color.min(axis=2).astype(np.float64)
    step = kernels.round_luma_shift(np.ascontiguousarray(dy), pixel_pattern(params), up, down)
    samples[:h, :w, :ncol] = (color + step[:, :, None]).astype(np.uint8)
    return img.with_samples(samples)


def pixel_pattern(params: DwtDctParams) -> np.ndarray:
    """Luma-domain footprint of one unit of carrier coefficient (unit norm)."""
    zero = np.zeros((params.block_size, params.block_size))
    return haar_dwt2_inverse(SubbandSet(params.pattern(), zero, zero, zero))


def tile_votes(img: RasterImage, params: DwtDctParams) -> np.ndarray:
    """Per-tile hard decisions (1 where the coefficient sits nearer the 1-coset)."""
    _, sb = _luma_ll(img)
    q = kernels.block_coefficients(np.ascontiguousarray(sb.ll), params.pattern()) / params.delta
    d0 = np.abs(q - np.floor(q + 0.5))
    d1 = np.abs(q - 0.5 - np.floor(q))
    return (d1 < d0).astype(np.int64)


def dwtdct_extract_bits(
    img: RasterImage, params: DwtDctParams | None = None, bit_count: int = DEFAULT_BITS
) -> ExtractedBits:
    params = params or DwtDctParams()
    if bit_count < 1:
        raise BadParams("bit_count must be positive")
    _check_size(img, bit_count, params)
    votes = tile_votes(img, params)
    idx = _bit_per_tile(votes.shape, bit_count).reshape(-1)
    ones = np.bincount(idx, weights=votes.reshape(-1), minlength=bit_count)
    total = np.bincount(idx, minlength=bit_count)
    zeros = total - ones
    bits = (ones > zeros).astype(np.uint8)
    confidence = np.abs(ones - zeros) / total
    return ExtractedBits(bits, confidence, int(total.min()))


def hamming_fraction(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.count_nonzero(np.asarray(a) != np.asarray(b))) / len(a)


def dwtdct_detect(
    img: RasterImage, registry: PayloadRegistry, params: DwtDctParams | None = None
) -> DetectionResult:
    if not registry.entries:
        raise EmptyRegistry("registry has no entries")
    extracted = dwtdct_extract_bits(img, params, registry.bit_length)
    best_label, best = None, 2.0
    for label, payload in registry.entries:
        d = hamming_fraction(extracted.bits, payload.bits)
        if d < best:
            best_label, best = label, d
    detected = best <= registry.match_threshold
    return DetectionResult(
        detected=detected,
        label=best_label if detected else None,
        distance_fraction=best,
        details={"closest": best_label, "bits": np.packbits(extracted.bits).tobytes().hex()},
    )


def registry_from_labels(labels: Sequence[str]) -> PayloadRegistry:
    """Registry whose payloads are the ASCII bytes of each label."""
    return PayloadRegistry(tuple((s, WatermarkPayload.from_bytes(s.encode("ascii"))) for s in labels))


def default_registry() -> PayloadRegistry:
    """The four-label registry shipped with the package."""
    text = resources.files("markinspect").joinpath("data/default_registry.json").read_text("utf-8")
    return PayloadRegistry.from_json(text)
