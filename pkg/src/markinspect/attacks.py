"""Parameterized image degradations and the robustness matrix runner."""

from __future__ import annotations

import csv
import enum
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .blob import FileBlob, ImageFormat
from .c2pa import probe_c2pa
from .dwtdct import DwtDctParams, PayloadRegistry, dwtdct_extract_bits, hamming_fraction
from .errors import BadParams
from .fingerprint import RegistryStore, compute_phash, hamming, match_bits
from .image import RasterImage, decode_raster, encode_raster, resize_bilinear, round_to_uint8
from .lsb import frame_bit_error_rate, lsb_extract
from .metadata import classify_ai_origin, extract_records, strip_metadata


class AttackKind(str, enum.Enum):
    JPEG_REENCODE = "JpegReencode"
    RESIZE = "Resize"
    CENTER_CROP = "CenterCrop"
    GAUSSIAN_NOISE = "GaussianNoise"
    METADATA_STRIP = "MetadataStrip"
    IDENTITY = "Identity"


# kind -> (parameter name, low, high)
_RANGES = {
    AttackKind.JPEG_REENCODE: ("quality", 1, 100),
    AttackKind.RESIZE: ("scale", 0.1, 4.0),
    AttackKind.CENTER_CROP: ("fraction", 0.1, 1.0),
    AttackKind.GAUSSIAN_NOISE: ("sigma", 0.0, 255.0),
}


@dataclass(frozen=True)
class Attack:
    kind: AttackKind
    value: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", AttackKind(self.kind))
        spec = _RANGES.get(self.kind)
        if spec is None:
            if self.value is not None:
                raise BadParams(f"{self.kind.value} takes no parameter")
            return
        name, lo, hi = spec
        if self.value is None or isinstance(self.value, bool):
            raise BadParams(f"{self.kind.value} requires {name}")
        if not lo <= self.value <= hi:
            raise BadParams(f"{self.kind.value} {name} {self.value} outside [{lo}, {hi}]")
        if self.kind is AttackKind.JPEG_REENCODE and int(self.value) != self.value:
            raise BadParams("JPEG quality must be an integer")

    @classmethod
    def jpeg(cls, quality: int) -> "Attack":
        return cls(AttackKind.JPEG_REENCODE, quality)

    @classmethod
    def resize(cls, scale: float) -> "Attack":
        return cls(AttackKind.RESIZE, scale)

    @classmethod
    def crop(cls, fraction: float) -> "Attack":
        return cls(AttackKind.CENTER_CROP, fraction)

    @classmethod
    def noise(cls, sigma: float) -> "Attack":
        return cls(AttackKind.GAUSSIAN_NOISE, sigma)

    @classmethod
    def strip(cls) -> "Attack":
        return cls(AttackKind.METADATA_STRIP)

    @classmethod
    def identity(cls) -> "Attack":
        return cls(AttackKind.IDENTITY)

    @property
    def name(self) -> str:
        if self.value is None:
            return self.kind.value
        v = int(self.value) if float(self.value).is_integer() else self.value
        return f"{self.kind.value}({v})"

    def to_dict(self) -> dict:
        d = {"kind": self.kind.value}
        if self.value is not None:
            d[_RANGES[self.kind][0]] = self.value
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "Attack":
        try:
            kind = AttackKind(d["kind"])
        except (KeyError, ValueError) as exc:
            raise BadParams(f"unknown attack {d!r}") from exc
        spec = _RANGES.get(kind)
        return cls(kind, d.get(spec[0]) if spec else None)


DEFAULT_GRID = (
    Attack.identity(),
    Attack.strip(),
    Attack.jpeg(95),
    Attack.jpeg(85),
    Attack.jpeg(70),
    Attack.jpeg(50),
    Attack.resize(0.5),
    Attack.crop(0.8),
    Attack.noise(2.0),
)


def load_attack_grid(text: str) -> list[Attack]:
    """JSON array of {"kind": ..., <param>: ...} objects."""
    doc = json.loads(text)
    if not isinstance(doc, list):
        raise BadParams("attack grid must be a JSON array")
    return [Attack.from_dict(d) for d in doc]


def _rounded(x: float) -> int:
    return max(1, int(np.floor(x + 0.5)))


def apply_attack(blob: FileBlob, attack: Attack, seed: int = 0) -> FileBlob:
    """Deterministic in (blob, attack, seed).  Pixel attacks re-encode as PNG except JpegReencode."""
    kind = attack.kind
    if kind is AttackKind.IDENTITY:
        return FileBlob(blob.data)
    if kind is AttackKind.METADATA_STRIP:
        return strip_metadata(blob)
    img = decode_raster(blob)
    if kind is AttackKind.JPEG_REENCODE:
        return encode_raster(img, ImageFormat.JPEG, quality=int(attack.value))
    if kind is AttackKind.RESIZE:
        out = resize_bilinear(img, _rounded(img.width * attack.value), _rounded(img.height * attack.value))
    elif kind is AttackKind.CENTER_CROP:
        cw, ch = _rounded(img.width * attack.value), _rounded(img.height * attack.value)
        x0, y0 = (img.width - cw) // 2, (img.height - ch) // 2
        out = img.with_samples(np.array(img.samples[y0 : y0 + ch, x0 : x0 + cw]))
    else:
        out = _add_noise(img, attack.value, seed)
    return encode_raster(out, ImageFormat.PNG)


def _add_noise(img: RasterImage, sigma: float, seed: int) -> RasterImage:
    if sigma == 0:
        return img
    rng = np.random.default_rng(seed)
    samples = np.array(img.samples)
    ncol = img.channels.color_count
    noisy = samples[:, :, :ncol] + rng.normal(0.0, sigma, samples[:, :, :ncol].shape)
    samples[:, :, :ncol] = round_to_uint8(noisy)
    return img.with_samples(samples)


# -- robustness matrix ---------------------------------------------------------

TECHNIQUES = ("lsb", "dwtdct", "metadata", "c2pa", "fingerprint")


@dataclass(frozen=True)
class MarkedItem:
    """A corpus file and the markings it was given.

    ``truth`` maps technique to its expected detector output: LSB payload
    bytes, DWT-DCT registry label, fingerprint label, or ``True`` for metadata
    and C2PA.
    """

    item_id: str
    blob: FileBlob = field(repr=False)
    truth: Mapping[str, object]


@dataclass(frozen=True)
class ItemResult:
    item_id: str
    survived: bool
    metric: float | None
    error: str | None = None

    def to_dict(self) -> dict:
        return {"item_id": self.item_id, "survived": self.survived, "metric": self.metric, "error": self.error}


@dataclass(frozen=True)
class MatrixCell:
    technique: str
    attack: str
    metric_name: str
    items: tuple[ItemResult, ...]

    @property
    def n_items(self) -> int:
        return len(self.items)

    @property
    def n_survived(self) -> int:
        return sum(r.survived for r in self.items)

    @property
    def survival_rate(self) -> float:
        return self.n_survived / self.n_items if self.items else 0.0

    @property
    def survived(self) -> bool:
        """True when every item carrying the technique survived."""
        return bool(self.items) and self.n_survived == self.n_items

    @property
    def mean_metric(self) -> float | None:
        vals = [r.metric for r in self.items if r.metric is not None]
        return float(np.mean(vals)) if vals else None

    def to_dict(self) -> dict:
        return {
            "technique": self.technique,
            "attack": self.attack,
            "metric_name": self.metric_name,
            "n_items": self.n_items,
            "n_survived": self.n_survived,
            "survival_rate": self.survival_rate,
            "survived": self.survived,
            "mean_metric": self.mean_metric,
            "errors": sum(r.error is not None for r in self.items),
            "items": [r.to_dict() for r in self.items],
        }


@dataclass(frozen=True)
class RobustnessMatrix:
    techniques: tuple[str, ...]
    attacks: tuple[Attack, ...]
    cells: tuple[MatrixCell, ...]  # row-major: technique, then attack

    def cell(self, technique: str, attack: Attack | str) -> MatrixCell:
        name = attack if isinstance(attack, str) else attack.name
        for c in self.cells:
            if c.technique == technique and c.attack == name:
                return c
        raise KeyError((technique, name))

    def to_dict(self) -> dict:
        return {
            "techniques": list(self.techniques),
            "attacks": [a.to_dict() | {"name": a.name} for a in self.attacks],
            "cells": [c.to_dict() for c in self.cells],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["technique", "attack", "n_items", "n_survived", "survival_rate", "metric_name", "mean_metric", "errors"])
        for c in self.cells:
            m = c.mean_metric
            w.writerow([
                c.technique, c.attack, c.n_items, c.n_survived, f"{c.survival_rate:.4f}",
                c.metric_name, "" if m is None else f"{m:.6f}", sum(r.error is not None for r in c.items),
            ])
        return buf.getvalue()


_METRIC = {"lsb": "ber", "dwtdct": "ber", "metadata": "detected", "c2pa": "present", "fingerprint": "hamming_bits"}


@dataclass(frozen=True)
class Detectors:
    registry: PayloadRegistry
    fp_store: RegistryStore
    params: DwtDctParams = field(default_factory=DwtDctParams)

    def evaluate(self, technique: str, blob: FileBlob, expected) -> tuple[bool, float | None]:
        if technique == "metadata":
            found = classify_ai_origin(extract_records(blob)).is_ai_declared
            return found == bool(expected), float(found)
        if technique == "c2pa":
            present = probe_c2pa(blob).present
            return present == bool(expected), float(present)
        img = decode_raster(blob)
        if technique == "lsb":
            ber = frame_bit_error_rate(img, expected)
            try:
                ok = lsb_extract(img) == expected
            except Exception:
                ok = False
            return ok, ber
        if technique == "dwtdct":
            truth = self.registry.lookup(expected)
            bits = dwtdct_extract_bits(img, self.params, len(truth)).bits
            ber = hamming_fraction(bits, truth.bits)
            # survival = the registry decision names the expected label
            best = min(self.registry.entries, key=lambda e: hamming_fraction(bits, e[1].bits))
            ok = best[0] == expected and hamming_fraction(bits, best[1].bits) <= self.registry.match_threshold
            return ok, ber
        if technique == "fingerprint":
            h = compute_phash(img)
            own = [r for r in self.fp_store.records if r.source_label == expected]
            dist = min((hamming(h, r.bits) for r in own), default=None)
            m = match_bits(self.fp_store, h)
            return m is not None and m.record.source_label == expected, None if dist is None else float(dist)
        raise BadParams(f"unknown technique {technique!r}")


def _run_cell(detectors: Detectors, technique: str, attack: Attack, items, seed: int) -> MatrixCell:
    results = []
    for item in items:
        try:
            attacked = apply_attack(item.blob, attack, seed)
            ok, metric = detectors.evaluate(technique, attacked, item.truth[technique])
            results.append(ItemResult(item.item_id, bool(ok), metric))
        except Exception as exc:  # a cell failure must not abort the matrix
            results.append(ItemResult(item.item_id, False, None, f"{type(exc).__name__}: {exc}"))
    return MatrixCell(technique, attack.name, _METRIC[technique], tuple(results))


def run_robustness_matrix(
    corpus: Sequence[MarkedItem],
    techniques: Sequence[str],
    attacks: Sequence[Attack],
    registry: PayloadRegistry,
    fp_store: RegistryStore | None = None,
    seed: int = 0,
    jobs: int = 1,
    params: DwtDctParams | None = None,
) -> RobustnessMatrix:
    """One cell per (technique, attack); each cell covers the items carrying that technique."""
    for t in techniques:
        if t not in _METRIC:
            raise BadParams(f"unknown technique {t!r}")
    detectors = Detectors(registry, fp_store or RegistryStore(), params or DwtDctParams())
    jobs_list = [
        (t, a, [it for it in corpus if t in it.truth]) for t in techniques for a in attacks
    ]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            cells = list(pool.map(lambda j: _run_cell(detectors, *j, seed), jobs_list))
    else:
        cells = [_run_cell(detectors, *j, seed) for j in jobs_list]
    return RobustnessMatrix(tuple(techniques), tuple(attacks), tuple(cells))
