"""Per-image provenance scan, corpus aggregation and report rendering."""

from __future__ import annotations

import csv
import enum
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Protocol, Sequence

from . import c2pa, dwtdct, fingerprint, lsb
from .blob import FileBlob
from .c2pa import HardBinding, probe_c2pa
from .dwtdct import DwtDctParams, PayloadRegistry, dwtdct_detect
from .errors import BadParams, EmptyCorpus, MarkInspectError, StoreIoFailure
from .fingerprint import RegistryStore, compute_phash, match_bits
from .image import RasterImage, decode_raster
from .lsb import lsb_extract
from .metadata import RULES_VERSION, RuleConfig, classify_ai_origin, extract_records

SCHEMA_VERSION = "markinspect-report/1"


class Technique(str, enum.Enum):
    METADATA = "Metadata"
    C2PA_MANIFEST = "C2paManifest"
    C2PA_HARD_BINDING_VALID = "C2paHardBindingValid"
    INVISIBLE_WATERMARK = "InvisibleWatermark"
    FINGERPRINT_MATCH = "FingerprintMatch"
    LSB_PAYLOAD = "LsbPayload"


# metadata-carried findings vanish with the container; the rest ride in pixels
REMOVABLE = {Technique.METADATA, Technique.C2PA_MANIFEST, Technique.C2PA_HARD_BINDING_VALID}
LABELLED = {Technique.INVISIBLE_WATERMARK, Technique.FINGERPRINT_MATCH}


@dataclass(frozen=True, order=True)
class TechniqueHit:
    kind: Technique
    label: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Technique(self.kind))
        if (self.kind in LABELLED) != (self.label is not None):
            raise ValueError(f"{self.kind.value} label mismatch: {self.label!r}")

    def __str__(self) -> str:
        return self.kind.value if self.label is None else f"{self.kind.value}({self.label})"

    @classmethod
    def parse(cls, text: str) -> "TechniqueHit":
        if text.endswith(")") and "(" in text:
            kind, label = text[:-1].split("(", 1)
            return cls(Technique(kind), label)
        return cls(Technique(text))


@dataclass(frozen=True)
class VisibleDisclosure:
    """Human annotation only; never inferred from pixels."""

    assessed: bool = False
    visible: bool | None = None

    @classmethod
    def annotated(cls, visible: bool) -> "VisibleDisclosure":
        return cls(True, bool(visible))

    def to_dict(self) -> dict:
        if not self.assessed:
            return {"status": "Unassessed"}
        return {"status": "Annotated", "visible": self.visible}

    @classmethod
    def from_dict(cls, d: Mapping) -> "VisibleDisclosure":
        if d["status"] == "Unassessed":
            return cls()
        return cls.annotated(d["visible"])


@dataclass(frozen=True)
class CorpusAnnotation:
    image_id: str
    visible_mark: bool
    deployment_category: int
    provider_name: str
    provider_country: str
    model_name: str | None = None

    def __post_init__(self):
        if self.deployment_category not in (1, 2, 3, 4):
            raise ValueError(f"deployment category must be 1..4, got {self.deployment_category}")

    def to_dict(self) -> dict:
        return {
            "visible_mark": self.visible_mark,
            "deployment_category": self.deployment_category,
            "provider_name": self.provider_name,
            "provider_country": self.provider_country,
            "model_name": self.model_name,
        }

    @classmethod
    def from_dict(cls, image_id: str, d: Mapping) -> "CorpusAnnotation":
        return cls(
            image_id,
            _as_bool(d["visible_mark"]),
            int(d["deployment_category"]),
            str(d["provider_name"]),
            str(d["provider_country"]),
            d.get("model_name") or None,
        )


def _as_bool(v) -> bool:
    if isinstance(v, str):
        return v.strip().lower() in ("1", "true", "yes", "y")
    return bool(v)


def load_annotations(path: str | Path) -> dict[str, CorpusAnnotation]:
    """JSON object keyed by image_id, or CSV with an ``image_id`` column."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".csv":
        rows = list(csv.DictReader(text.splitlines()))
        return {r["image_id"]: CorpusAnnotation.from_dict(r["image_id"], r) for r in rows}
    doc = json.loads(text)
    return {k: CorpusAnnotation.from_dict(k, v) for k, v in doc.items()}


def dump_annotations(annotations: Mapping[str, CorpusAnnotation]) -> str:
    return json.dumps({k: annotations[k].to_dict() for k in sorted(annotations)}, indent=2, sort_keys=True) + "\n"


@dataclass(frozen=True)
class ProvenanceReport:
    image_id: str
    techniques_found: frozenset[TechniqueHit] = frozenset()
    visible_disclosure: VisibleDisclosure = VisibleDisclosure()
    detector_versions: Mapping[str, str] = field(default_factory=dict)
    details: Mapping[str, object] = field(default_factory=dict)

    @property
    def machine_readable_marking(self) -> bool:
        return bool(self.techniques_found)

    def kinds(self) -> set[Technique]:
        return {t.kind for t in self.techniques_found}

    def to_dict(self) -> dict:
        found = sorted(self.techniques_found)
        return {
            "image_id": self.image_id,
            "machine_readable_marking": self.machine_readable_marking,
            "techniques_found": [str(t) for t in found],
            "marking_classes": {
                "removable": [str(t) for t in found if t.kind in REMOVABLE],
                "pixel_carried": [str(t) for t in found if t.kind not in REMOVABLE],
            },
            "visible_disclosure": self.visible_disclosure.to_dict(),
            "detector_versions": dict(sorted(self.detector_versions.items())),
            "details": self.details,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ProvenanceReport":
        found = frozenset(TechniqueHit.parse(t) for t in d["techniques_found"])
        if d.get("machine_readable_marking", bool(found)) != bool(found):
            raise ValueError(f"{d['image_id']}: machine_readable_marking disagrees with techniques_found")
        return cls(
            d["image_id"],
            found,
            VisibleDisclosure.from_dict(d["visible_disclosure"]),
            dict(d.get("detector_versions", {})),
            d.get("details", {}),
        )


# -- detectors -------------------------------------------------------------------


@dataclass
class ScanContext:
    blob: FileBlob
    registry: PayloadRegistry | None
    fp_store: RegistryStore | None
    rules: RuleConfig
    params: DwtDctParams
    _image: RasterImage | None = None

    @property
    def image(self) -> RasterImage:
        if self._image is None:
            self._image = decode_raster(self.blob)
        return self._image


class Detector(Protocol):
    name: str
    version: str

    def run(self, ctx: ScanContext) -> tuple[set[TechniqueHit], dict]: ...


@dataclass(frozen=True)
class MetadataDetector:
    name: str = "metadata"
    version: str = RULES_VERSION

    def run(self, ctx):
        finding = classify_ai_origin(extract_records(ctx.blob), ctx.rules)
        hits = {TechniqueHit(Technique.METADATA)} if finding.is_ai_declared else set()
        return hits, finding.to_dict()


@dataclass(frozen=True)
class C2paDetector:
    name: str = "c2pa"
    version: str = c2pa.VERSION

    def run(self, ctx):
        finding = probe_c2pa(ctx.blob)
        hits = set()
        if finding.present:
            hits.add(TechniqueHit(Technique.C2PA_MANIFEST))
            if finding.hard_binding is HardBinding.VALID:
                hits.add(TechniqueHit(Technique.C2PA_HARD_BINDING_VALID))
        return hits, finding.to_dict()


@dataclass(frozen=True)
class LsbDetector:
    name: str = "lsb"
    version: str = lsb.VERSION

    def run(self, ctx):
        try:
            payload = lsb_extract(ctx.image)
        except MarkInspectError as exc:
            return set(), {"found": False, "reason": type(exc).__name__}
        return {TechniqueHit(Technique.LSB_PAYLOAD)}, {"found": True, "payload_hex": payload.hex()}


@dataclass(frozen=True)
class DwtDctDetector:
    name: str = "dwtdct"
    version: str = dwtdct.VERSION

    def run(self, ctx):
        if ctx.registry is None or not ctx.registry.entries:
            return set(), {"skipped": "no payload registry"}
        result = dwtdct_detect(ctx.image, ctx.registry, ctx.params)
        detail = result.to_dict() | {"closest": result.details.get("closest")}
        if not result.detected:
            return set(), detail
        return {TechniqueHit(Technique.INVISIBLE_WATERMARK, result.label)}, detail


@dataclass(frozen=True)
class FingerprintDetector:
    name: str = "fingerprint"
    version: str = fingerprint.VERSION
    max_distance: int = fingerprint.DEFAULT_MAX_DISTANCE

    def run(self, ctx):
        bits = compute_phash(ctx.image)
        detail = {"phash": f"{bits:016x}", "match": None}
        if ctx.fp_store is None:
            return set(), detail
        m = match_bits(ctx.fp_store, bits, self.max_distance)
        if m is None:
            return set(), detail
        detail["match"] = m.to_dict()
        return {TechniqueHit(Technique.FINGERPRINT_MATCH, m.record.source_label)}, detail


DEFAULT_DETECTORS: tuple[Detector, ...] = (
    MetadataDetector(),
    C2paDetector(),
    LsbDetector(),
    DwtDctDetector(),
    FingerprintDetector(),
)


def scan_image(
    blob: FileBlob,
    registry: PayloadRegistry | None,
    fp_store: RegistryStore | None,
    annotation: CorpusAnnotation | None = None,
    image_id: str = "image",
    detectors: Sequence[Detector] | None = None,
    rules: RuleConfig | None = None,
    params: DwtDctParams | None = None,
) -> ProvenanceReport:
    """Run every detector; a detector that raises is recorded, never fatal."""
    ctx = ScanContext(blob, registry, fp_store, rules or RuleConfig(), params or DwtDctParams())
    found: set[TechniqueHit] = set()
    details: dict[str, object] = {}
    versions: dict[str, str] = {}
    for det in detectors if detectors is not None else DEFAULT_DETECTORS:
        versions[det.name] = det.version
        try:
            hits, detail = det.run(ctx)
        except Exception as exc:  # per-detector failure is reported in place
            hits, detail = set(), {"error": f"{type(exc).__name__}: {exc}"}
        found |= hits
        details[det.name] = detail
    disclosure = (
        VisibleDisclosure.annotated(annotation.visible_mark) if annotation else VisibleDisclosure()
    )
    return ProvenanceReport(image_id, frozenset(found), disclosure, versions, details)


IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg"}


def corpus_files(root: str | Path) -> list[tuple[str, Path]]:
    """(image_id, path) for every PNG/JPEG under ``root``; the id is the file stem."""
    root = Path(root)
    if root.is_file():
        return [(root.stem, root)]
    files = sorted(p for p in root.rglob("*") if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES)
    seen: dict[str, Path] = {}
    for p in files:
        if p.stem in seen:
            raise BadParams(f"duplicate image id {p.stem!r}: {seen[p.stem]} and {p}")
        seen[p.stem] = p
    return sorted(seen.items())


def scan_corpus(
    root: str | Path,
    registry: PayloadRegistry | None,
    fp_store: RegistryStore | None,
    annotations: Mapping[str, CorpusAnnotation] | None = None,
    jobs: int = 1,
    rules: RuleConfig | None = None,
) -> list[ProvenanceReport]:
    annotations = annotations or {}
    items = corpus_files(root)

    def one(item):
        image_id, path = item
        try:
            blob = FileBlob.read(path)
        except OSError as exc:
            raise StoreIoFailure(f"cannot read {path}: {exc}") from exc
        return scan_image(blob, registry, fp_store, annotations.get(image_id), image_id, rules=rules)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(one, items))
    return [one(i) for i in items]


# -- aggregation -----------------------------------------------------------------


def percent(count: int, n: int) -> int:
    """100 * count / n rounded half-up, in exact integer arithmetic."""
    return (200 * count + n) // (2 * n)


@dataclass(frozen=True)
class GroupStats:
    n: int
    machine_readable: int
    visible: int

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "machine_readable": self.machine_readable,
            "pct_machine_readable": percent(self.machine_readable, self.n),
            "visible": self.visible,
            "pct_visible": percent(self.visible, self.n),
        }


@dataclass(frozen=True)
class CorpusSummary:
    n_images: int
    n_machine_readable: int
    n_visible: int
    n_visible_assessed: int
    technique_counts: Mapping[str, int]
    by_category: Mapping[int, GroupStats]
    by_country: Mapping[str, GroupStats]

    @property
    def pct_machine_readable(self) -> int:
        return percent(self.n_machine_readable, self.n_images)

    @property
    def pct_visible(self) -> int:
        return percent(self.n_visible, self.n_images)

    def to_dict(self) -> dict:
        return {
            "n_images": self.n_images,
            "machine_readable": self.n_machine_readable,
            "pct_machine_readable": self.pct_machine_readable,
            "visible": self.n_visible,
            "visible_assessed": self.n_visible_assessed,
            "pct_visible": self.pct_visible,
            "technique_counts": dict(self.technique_counts),
            "by_category": {str(k): v.to_dict() for k, v in sorted(self.by_category.items())},
            "by_country": {k: v.to_dict() for k, v in sorted(self.by_country.items())},
        }


def aggregate_corpus(
    reports: Sequence[ProvenanceReport], annotations: Mapping[str, CorpusAnnotation] | None = None
) -> CorpusSummary:
    if not reports:
        raise EmptyCorpus("no reports to aggregate")
    annotations = annotations or {}
    counts = {t.value: 0 for t in Technique}
    visible = assessed = marked = 0
    cat: dict[int, list[int]] = {}
    country: dict[str, list[int]] = {}
    for r in reports:
        for kind in r.kinds():
            counts[kind.value] += 1
        ann = annotations.get(r.image_id)
        disclosure = VisibleDisclosure.annotated(ann.visible_mark) if ann else r.visible_disclosure
        is_visible = bool(disclosure.assessed and disclosure.visible)
        assessed += disclosure.assessed
        visible += is_visible
        marked += r.machine_readable_marking
        if ann is not None:
            for key, table in ((ann.deployment_category, cat), (ann.provider_country, country)):
                row = table.setdefault(key, [0, 0, 0])
                row[0] += 1
                row[1] += r.machine_readable_marking
                row[2] += is_visible
    return CorpusSummary(
        len(reports),
        marked,
        visible,
        assessed,
        counts,
        {k: GroupStats(*v) for k, v in cat.items()},
        {k: GroupStats(*v) for k, v in country.items()},
    )


# -- rendering -------------------------------------------------------------------


def scan_document(reports: Sequence[ProvenanceReport]) -> dict:
    return {"schema_version": SCHEMA_VERSION, "reports": [r.to_dict() for r in reports]}


def summary_document(summary: CorpusSummary) -> dict:
    return {"schema_version": SCHEMA_VERSION, "summary": summary.to_dict()}


def load_schema() -> dict:
    text = resources.files("markinspect").joinpath("data/report.schema.json").read_text("utf-8")
    return json.loads(text)


def reports_from_document(doc: Mapping) -> list[ProvenanceReport]:
    if "reports" in doc:
        return [ProvenanceReport.from_dict(r) for r in doc["reports"]]
    return [ProvenanceReport.from_dict(doc)]


def render_report(obj, fmt: str = "json") -> str:
    """JSON (sorted keys, stable) or Markdown for a report, a list of reports or a summary."""
    if isinstance(obj, ProvenanceReport):
        doc = obj.to_dict() | {"schema_version": SCHEMA_VERSION}
    elif isinstance(obj, CorpusSummary):
        doc = summary_document(obj)
    else:
        doc = scan_document(list(obj))
    if fmt == "json":
        return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
    if fmt in ("md", "markdown"):
        if isinstance(obj, CorpusSummary):
            return _summary_markdown(obj)
        reports = [obj] if isinstance(obj, ProvenanceReport) else list(obj)
        return _reports_markdown(reports)
    raise ValueError(f"unknown format {fmt!r}")


def _summary_markdown(s: CorpusSummary) -> str:
    lines = [
        "# Provenance summary",
        "",
        f"images: {s.n_images}",
        "",
        f"machine-readable: {s.n_machine_readable}/{s.n_images} ({s.pct_machine_readable}%)",
        "",
        f"visible disclosure: {s.n_visible}/{s.n_images} ({s.pct_visible}%)",
        "",
        "| technique | images | share |",
        "|---|---:|---:|",
    ]
    for t in Technique:
        n = s.technique_counts.get(t.value, 0)
        lines.append(f"| {t.value} | {n} | {percent(n, s.n_images)}% |")
    for title, table in (("Deployment category", s.by_category), ("Provider country", s.by_country)):
        if not table:
            continue
        lines += ["", f"## {title}", "", "| group | n | machine-readable | visible |", "|---|---:|---:|---:|"]
        for key in sorted(table):
            g = table[key]
            lines.append(
                f"| {key} | {g.n} | {g.machine_readable} ({percent(g.machine_readable, g.n)}%)"
                f" | {g.visible} ({percent(g.visible, g.n)}%) |"
            )
    return "\n".join(lines) + "\n"


def _reports_markdown(reports: Sequence[ProvenanceReport]) -> str:
    lines = ["# Provenance scan", "", "| image | machine-readable | techniques | visible |", "|---|---|---|---|"]
    for r in reports:
        vd = r.visible_disclosure
        vis = "unassessed" if not vd.assessed else ("yes" if vd.visible else "no")
        techs = ", ".join(str(t) for t in sorted(r.techniques_found)) or "none"
        lines.append(f"| {r.image_id} | {'yes' if r.machine_readable_marking else 'no'} | {techs} | {vis} |")
    for t in Technique:
        hits = [(r.image_id, h) for r in reports for h in sorted(r.techniques_found) if h.kind is t]
        lines += ["", f"## {t.value}", ""]
        if not hits:
            lines.append("No images.")
            continue
        removable = "removable with the file's metadata" if t in REMOVABLE else "carried in pixels"
        lines.append(f"{len(hits)} image(s); {removable}.")
        lines.append("")
        lines += [f"- {image_id}" + (f": {h.label}" if h.label else "") for image_id, h in hits]
    return "\n".join(lines) + "\n"


def load_reference_fixture() -> tuple[list[ProvenanceReport], dict[str, CorpusAnnotation]]:
    """Fifty synthetic reports and annotations matching the published aggregate counts."""
    text = resources.files("markinspect").joinpath("data/reference_results.json").read_text("utf-8")
    doc = json.loads(text)
    annotations = {k: CorpusAnnotation.from_dict(k, v) for k, v in doc["annotations"].items()}
    return [ProvenanceReport.from_dict(r) for r in doc["reports"]], annotations
