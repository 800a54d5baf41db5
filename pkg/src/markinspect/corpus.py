"""Deterministic synthetic corpora with ground truth for end-to-end checks.

Output layout::

    <out>/images/<image_id>.png|.jpg
    <out>/annotations.json      visible mark, deployment category, provider
    <out>/ground_truth.json     markings applied and the techniques a scan must report
    <out>/registry.json         DWT-DCT payload registry
    <out>/fingerprints.ndjson   registered perceptual hashes
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .attacks import MarkedItem
from .blob import FileBlob
from .c2pa import embed_test_manifest
from .dwtdct import PayloadRegistry, default_registry, dwtdct_embed
from .errors import BadParams, StoreIoFailure
from .fingerprint import RegistryStore, register_fingerprint
from .image import decode_raster, encode_raster
from .lsb import lsb_embed
from .metadata import DigitalSourceDeclaration, embed_ai_metadata
from .scanner import CorpusAnnotation, Technique, TechniqueHit, dump_annotations
from .synth import KINDS

MARKINGS = ("dwtdct", "lsb", "metadata", "c2pa", "fingerprint")
COUNTRIES = ("US", "US", "CN", "GB", "IL", "DE", "CA", "FR")
FIXED_CREATED_AT = "2024-01-01T00:00:00Z"


@dataclass(frozen=True)
class FixtureGroup:
    count: int
    markings: tuple[str, ...] = ()
    kind: str | None = None  # None cycles through gradient/shapes
    format: str = "PNG"
    jpeg_quality: int = 92

    def __post_init__(self):
        object.__setattr__(self, "markings", tuple(self.markings))
        bad = set(self.markings) - set(MARKINGS)
        if bad:
            raise BadParams(f"unknown markings {sorted(bad)}")
        if self.count < 0:
            raise BadParams("group count must be non-negative")
        if self.kind is not None and self.kind not in KINDS:
            raise BadParams(f"unknown image kind {self.kind!r}")
        if self.format not in ("PNG", "JPEG"):
            raise BadParams("format must be PNG or JPEG")
        if self.format == "JPEG" and "lsb" in self.markings:
            raise BadParams("an LSB mark cannot be stored as JPEG")

    def to_dict(self) -> dict:
        return {
            "count": self.count,
            "markings": list(self.markings),
            "kind": self.kind,
            "format": self.format,
            "jpeg_quality": self.jpeg_quality,
        }


@dataclass(frozen=True)
class FixtureSpec:
    groups: tuple[FixtureGroup, ...]
    width: int = 256
    height: int = 256
    created_at: str = FIXED_CREATED_AT

    @property
    def n_images(self) -> int:
        return sum(g.count for g in self.groups)

    def to_dict(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "created_at": self.created_at,
            "groups": [g.to_dict() for g in self.groups],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "FixtureSpec":
        groups = tuple(
            FixtureGroup(
                int(g["count"]),
                tuple(g.get("markings", ())),
                g.get("kind"),
                g.get("format", "PNG"),
                int(g.get("jpeg_quality", 92)),
            )
            for g in d["groups"]
        )
        return cls(groups, int(d.get("width", 256)), int(d.get("height", 256)), d.get("created_at", FIXED_CREATED_AT))

    @classmethod
    def default(cls) -> "FixtureSpec":
        return cls(
            (
                FixtureGroup(4, ("dwtdct", "metadata")),
                FixtureGroup(3, ("c2pa",)),
                FixtureGroup(3, ("dwtdct", "c2pa", "fingerprint")),
                FixtureGroup(2, ("lsb",)),
                FixtureGroup(2, ("fingerprint",)),
                FixtureGroup(2, ("metadata", "dwtdct"), format="JPEG"),
                FixtureGroup(2, ()),
                FixtureGroup(2, (), kind="noise"),
            )
        )


@dataclass(frozen=True)
class GroundTruthItem:
    image_id: str
    file: str
    markings: tuple[str, ...]
    expected: tuple[str, ...]  # sorted TechniqueHit strings
    dwtdct_label: str | None = None
    lsb_payload_hex: str | None = None
    fingerprint_label: str | None = None

    def to_dict(self) -> dict:
        return {
            "image_id": self.image_id,
            "file": self.file,
            "markings": list(self.markings),
            "expected_techniques": list(self.expected),
            "dwtdct_label": self.dwtdct_label,
            "lsb_payload_hex": self.lsb_payload_hex,
            "fingerprint_label": self.fingerprint_label,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "GroundTruthItem":
        return cls(
            d["image_id"], d["file"], tuple(d["markings"]), tuple(d["expected_techniques"]),
            d.get("dwtdct_label"), d.get("lsb_payload_hex"), d.get("fingerprint_label"),
        )

    def truth(self) -> dict:
        """Expected detector outputs in the form the robustness runner takes."""
        out: dict[str, object] = {}
        if self.dwtdct_label:
            out["dwtdct"] = self.dwtdct_label
        if self.lsb_payload_hex is not None:
            out["lsb"] = bytes.fromhex(self.lsb_payload_hex)
        if self.fingerprint_label:
            out["fingerprint"] = self.fingerprint_label
        if "metadata" in self.markings or "c2pa" in self.markings:
            out["metadata"] = True
        if "c2pa" in self.markings:
            out["c2pa"] = True
        return out


@dataclass(frozen=True)
class GroundTruth:
    seed: int
    spec: FixtureSpec
    items: tuple[GroundTruthItem, ...]
    root: Path | None = field(default=None, compare=False)

    def counts(self) -> dict:
        techniques = {t.value: 0 for t in Technique}
        for it in self.items:
            for kind in {TechniqueHit.parse(s).kind for s in it.expected}:
                techniques[kind.value] += 1
        return {
            "n_images": len(self.items),
            "machine_readable": sum(bool(it.expected) for it in self.items),
            "markings": {m: sum(m in it.markings for it in self.items) for m in MARKINGS},
            "technique_counts": techniques,
        }

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "spec": self.spec.to_dict(),
            "items": [it.to_dict() for it in self.items],
            "counts": self.counts(),
        }

    @classmethod
    def load(cls, root: str | Path) -> "GroundTruth":
        root = Path(root)
        d = json.loads((root / "ground_truth.json").read_text(encoding="utf-8"))
        items = tuple(GroundTruthItem.from_dict(x) for x in d["items"])
        return cls(d["seed"], FixtureSpec.from_dict(d["spec"]), items, root)

    def marked_items(self) -> list[MarkedItem]:
        if self.root is None:
            raise StoreIoFailure("ground truth was not loaded from a directory")
        return [MarkedItem(it.image_id, FileBlob.read(self.root / it.file), it.truth()) for it in self.items]


def _expected(markings, wm_label, fp_label) -> tuple[str, ...]:
    hits = set()
    if "metadata" in markings or "c2pa" in markings:
        hits.add(TechniqueHit(Technique.METADATA))
    if "c2pa" in markings:
        hits |= {TechniqueHit(Technique.C2PA_MANIFEST), TechniqueHit(Technique.C2PA_HARD_BINDING_VALID)}
    if wm_label:
        hits.add(TechniqueHit(Technique.INVISIBLE_WATERMARK, wm_label))
    if fp_label:
        hits.add(TechniqueHit(Technique.FINGERPRINT_MATCH, fp_label))
    if "lsb" in markings:
        hits.add(TechniqueHit(Technique.LSB_PAYLOAD))
    return tuple(str(h) for h in sorted(hits))


def generate_fixture_corpus(
    spec: FixtureSpec,
    out_dir: str | Path,
    seed: int = 0,
    registry: PayloadRegistry | None = None,
) -> GroundTruth:
    """Write images, annotations and ground truth; identical (spec, seed) gives identical bytes."""
    registry = registry or default_registry()
    labels = [label for label, _ in registry.entries]
    out = Path(out_dir)
    try:
        (out / "images").mkdir(parents=True, exist_ok=True)
        store_path = out / "fingerprints.ndjson"
        if store_path.exists():
            store_path.unlink()
    except OSError as exc:
        raise StoreIoFailure(f"cannot prepare {out}: {exc}") from exc
    store = RegistryStore(store_path, clock=lambda: spec.created_at)
    annotations = {}
    items = []
    index = 0
    cycle = ("gradient", "shapes")
    for group in spec.groups:
        for _ in range(group.count):
            rng = np.random.default_rng([seed, index])
            image_id = f"img-{index:03d}"
            kind = group.kind or cycle[index % 2]
            img = KINDS[kind](spec.width, spec.height, int(rng.integers(0, 2**31)))
            wm_label = fp_label = lsb_hex = None
            if "dwtdct" in group.markings:
                wm_label = labels[int(rng.integers(len(labels)))]
                img = dwtdct_embed(img, registry.lookup(wm_label))
            if "lsb" in group.markings:
                payload = f"lsb:{image_id}".encode("ascii")
                img = lsb_embed(img, payload)
                lsb_hex = payload.hex()
            blob = encode_raster(img, group.format, quality=group.jpeg_quality if group.format == "JPEG" else None)
            if "fingerprint" in group.markings:
                fp_label = f"FP-{image_id}"
                register_fingerprint(store, decode_raster(blob), fp_label)
            if "metadata" in group.markings:
                blob = embed_ai_metadata(blob, DigitalSourceDeclaration(f"synthgen-{kind}"))
            if "c2pa" in group.markings:
                blob = embed_test_manifest(blob, "markinspect-fixture", f"urn:uuid:fixture-{seed}-{index}")
            suffix = ".png" if group.format == "PNG" else ".jpg"
            rel = f"images/{image_id}{suffix}"
            try:
                blob.write(out / rel)
            except OSError as exc:
                raise StoreIoFailure(f"cannot write {rel}: {exc}") from exc
            annotations[image_id] = CorpusAnnotation(
                image_id,
                bool(rng.random() < 0.25),
                int(rng.integers(1, 5)),
                f"Provider {index + 1:02d}",
                COUNTRIES[int(rng.integers(len(COUNTRIES)))],
            )
            items.append(
                GroundTruthItem(
                    image_id, rel, group.markings, _expected(group.markings, wm_label, fp_label),
                    wm_label, lsb_hex, fp_label,
                )
            )
            index += 1
    truth = GroundTruth(seed, spec, tuple(items), out)
    try:
        (out / "annotations.json").write_text(dump_annotations(annotations), encoding="utf-8")
        (out / "registry.json").write_text(registry.to_json() + "\n", encoding="utf-8")
        (out / "ground_truth.json").write_text(
            json.dumps(truth.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    except OSError as exc:
        raise StoreIoFailure(f"cannot write corpus metadata: {exc}") from exc
    return truth


def mismatches(truth: GroundTruth, reports: Sequence) -> list[tuple[str, tuple[str, ...], tuple[str, ...]]]:
    """(image_id, expected, found) for every report that disagrees with ground truth."""
    by_id = {r.image_id: r for r in reports}
    out = []
    for it in truth.items:
        r = by_id.get(it.image_id)
        found = tuple(str(h) for h in sorted(r.techniques_found)) if r else ("<missing>",)
        if found != it.expected:
            out.append((it.image_id, it.expected, found))
    return out
