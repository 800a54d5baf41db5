"""Regenerate src/markinspect/data/reference_results.json.

Fifty synthetic systems whose marking and disclosure pattern reproduces the
published aggregate counts.  Only the aggregates are known, so the per-system
layout (which category hosts which technique, provider countries) is one
consistent assignment among many.
"""

import json
from pathlib import Path

from markinspect.scanner import (
    CorpusAnnotation,
    ProvenanceReport,
    Technique,
    TechniqueHit,
    VisibleDisclosure,
    dump_annotations,
)

MD = TechniqueHit(Technique.METADATA)
C2 = TechniqueHit(Technique.C2PA_MANIFEST)
HB = TechniqueHit(Technique.C2PA_HARD_BINDING_VALID)
WM_VENDOR = TechniqueHit(Technique.INVISIBLE_WATERMARK, "vendor-watermark")
WM_OPEN = TechniqueHit(Technique.INVISIBLE_WATERMARK, "open-source-library")

# (category, country, visible, techniques)
SYSTEMS = [
    # category 1: end-to-end, 8/10 marked, 2/10 visible
    (1, "US", False, {MD, WM_VENDOR}),
    (1, "GB", False, {WM_OPEN}),
    (1, "US", False, {MD, C2, HB}),
    (1, "US", False, {MD, C2, HB}),
    (1, "US", False, {MD, C2, HB}),
    (1, "US", False, {MD}),
    (1, "US", True, {MD}),
    (1, "CN", False, {MD}),
    (1, "CN", True, set()),
    (1, "US", False, set()),
    # category 2: API-based
    (2, "US", True, {MD, C2, HB}),
    (2, "AU", False, {MD, C2}),
    (2, "US", False, {MD}),
    (2, "DE", False, {MD}),
    (2, "US", False, {WM_OPEN}),
    (2, "US", True, {WM_OPEN}),
    (2, "US", False, set()),
    (2, "CN", True, set()),
    (2, "US", False, set()),
    (2, "IL", True, set()),
    (2, "US", False, set()),
    (2, "NL", False, set()),
    (2, "US", False, set()),
    (2, "CA", False, set()),
    (2, "US", False, set()),
    # category 3: hosted open-source models, provider country not listed
    (3, "unlisted", False, {WM_OPEN}),
    (3, "unlisted", False, {WM_OPEN}),
    *[(3, "unlisted", False, set())] * 8,
    # category 4: rebranded third-party models
    (4, "US", False, {MD}),
    (4, "CN", False, {WM_OPEN}),
    (4, "US", False, {WM_OPEN}),
    (4, "US", True, set()),
    (4, "FR", False, set()),
    (4, "US", True, set()),
    (4, "IN", False, set()),
    (4, "US", False, set()),
    (4, "US", False, set()),
    (4, "US", True, set()),
    (4, "GB", False, set()),
    (4, "US", False, set()),
    (4, "CN", False, set()),
    (4, "US", False, set()),
    (4, "US", False, set()),
]


def main():
    assert len(SYSTEMS) == 50
    reports, annotations = [], {}
    for i, (cat, country, visible, techniques) in enumerate(SYSTEMS, start=1):
        sid = f"system-{i:02d}"
        annotations[sid] = CorpusAnnotation(sid, visible, cat, f"Provider {i:02d}", country)
        reports.append(ProvenanceReport(sid, frozenset(techniques), VisibleDisclosure.annotated(visible)).to_dict())
    doc = {
        "description": "Synthetic per-system encoding of published aggregate results; layout within categories is illustrative.",
        "annotations": json.loads(dump_annotations(annotations)),
        "reports": reports,
    }
    out = Path(__file__).resolve().parents[1] / "src/markinspect/data/reference_results.json"
    out.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
