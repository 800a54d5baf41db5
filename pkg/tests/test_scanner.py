import json

import jsonschema
import pytest

from conftest import png_blob, smooth_rgb
from markinspect.attacks import Attack, apply_attack
from markinspect.c2pa import embed_test_manifest
from markinspect.dwtdct import default_registry, dwtdct_embed
from markinspect.errors import EmptyCorpus
from markinspect.fingerprint import RegistryStore, register_fingerprint
from markinspect.image import encode_raster
from markinspect.metadata import DigitalSourceDeclaration, embed_ai_metadata
from markinspect.scanner import (
    DEFAULT_DETECTORS,
    CorpusAnnotation,
    ProvenanceReport,
    Technique,
    TechniqueHit,
    VisibleDisclosure,
    aggregate_corpus,
    load_annotations,
    load_reference_fixture,
    load_schema,
    percent,
    render_report,
    scan_image,
)
from markinspect.synth import shapes_rgb

REG = default_registry()
SCHEMA = load_schema()


def _kinds(report):
    return {str(t) for t in report.techniques_found}


def test_xmp_only():
    blob = embed_ai_metadata(png_blob(smooth_rgb(128, 128)), DigitalSourceDeclaration("g"))
    r = scan_image(blob, REG, RegistryStore())
    assert r.machine_readable_marking and _kinds(r) == {"Metadata"}


def test_clean_image():
    r = scan_image(png_blob(shapes_rgb(128, 128, 1)), REG, RegistryStore())
    assert not r.machine_readable_marking and r.techniques_found == frozenset()
    assert r.visible_disclosure == VisibleDisclosure()


def test_dwtdct_after_strip():
    marked = dwtdct_embed(shapes_rgb(256, 256, 2), REG.lookup("DIFFUSION-XL"))
    blob = embed_test_manifest(embed_ai_metadata(encode_raster(marked, "PNG"), DigitalSourceDeclaration("g")))
    before = scan_image(blob, REG, RegistryStore())
    assert {"Metadata", "C2paManifest", "C2paHardBindingValid", "InvisibleWatermark(DIFFUSION-XL)"} == _kinds(before)
    after = scan_image(apply_attack(blob, Attack.strip()), REG, RegistryStore())
    assert _kinds(after) == {"InvisibleWatermark(DIFFUSION-XL)"}


def test_fingerprint_technique():
    store = RegistryStore(clock=lambda: "t")
    img = shapes_rgb(128, 128, 3)
    register_fingerprint(store, img, "known")
    r = scan_image(png_blob(img), REG, store)
    assert _kinds(r) == {"FingerprintMatch(known)"}


def test_detector_failure_recorded_not_fatal():
    tiny = png_blob(smooth_rgb(16, 16))
    r = scan_image(tiny, REG, RegistryStore())
    assert r.details["dwtdct"]["error"].startswith("ImageTooSmall")
    assert set(r.details) == {d.name for d in DEFAULT_DETECTORS}


def test_plugin_detector():
    class Always:
        name, version = "always", "always/0"

        def run(self, ctx):
            return {TechniqueHit(Technique.LSB_PAYLOAD)}, {"ok": True}

    r = scan_image(png_blob(smooth_rgb(32, 32)), None, None, detectors=[Always()])
    assert _kinds(r) == {"LsbPayload"} and r.detector_versions == {"always": "always/0"}


def test_visible_disclosure_from_annotation_only():
    ann = CorpusAnnotation("x", True, 2, "P", "US")
    r = scan_image(png_blob(smooth_rgb(32, 32)), REG, None, ann, "x")
    assert r.visible_disclosure == VisibleDisclosure.annotated(True)


def test_report_roundtrip_and_determinism():
    blob = embed_ai_metadata(png_blob(smooth_rgb(128, 128)), DigitalSourceDeclaration("g"))
    r = scan_image(blob, REG, RegistryStore(), image_id="a")
    text = render_report(r)
    assert text == render_report(scan_image(blob, REG, RegistryStore(), image_id="a"))
    back = ProvenanceReport.from_dict(json.loads(text))
    assert back.techniques_found == r.techniques_found and back.image_id == "a"
    assert render_report(back) == text
    jsonschema.validate(json.loads(text), SCHEMA)


def test_report_invariant_enforced():
    d = ProvenanceReport("a", frozenset({TechniqueHit(Technique.METADATA)})).to_dict()
    d["machine_readable_marking"] = False
    with pytest.raises(ValueError):
        ProvenanceReport.from_dict(d)


def test_technique_hit_labels():
    with pytest.raises(ValueError):
        TechniqueHit(Technique.INVISIBLE_WATERMARK)
    with pytest.raises(ValueError):
        TechniqueHit(Technique.METADATA, "x")
    h = TechniqueHit.parse("FingerprintMatch(a(b))")
    assert h.label == "a(b)" and str(h) == "FingerprintMatch(a(b))"


def test_annotation_category_validated():
    with pytest.raises(ValueError):
        CorpusAnnotation("x", False, 5, "P", "US")


def test_annotations_csv(tmp_path):
    p = tmp_path / "ann.csv"
    p.write_text("image_id,visible_mark,deployment_category,provider_name,provider_country,model_name\na,true,3,P,NL,\n")
    ann = load_annotations(p)
    assert ann["a"] == CorpusAnnotation("a", True, 3, "P", "NL", None)


# -- aggregation -------------------------------------------------------------------


def test_reference_fixture():
    reports, ann = load_reference_fixture()
    s = aggregate_corpus(reports, ann)
    assert (s.n_images, s.n_machine_readable, s.n_visible) == (50, 19, 9)
    assert (s.pct_machine_readable, s.pct_visible) == (38, 18)
    assert s.technique_counts["Metadata"] == 12
    assert s.technique_counts["C2paManifest"] == 5
    assert s.technique_counts["C2paHardBindingValid"] == 4
    assert s.technique_counts["InvisibleWatermark"] == 8
    assert s.by_category[1].n == 10 and s.by_category[1].machine_readable == 8 and s.by_category[1].visible == 2
    eu = {"AT", "BE", "BG", "CY", "CZ", "DE", "DK", "EE", "ES", "FI", "FR", "GR", "HR", "HU", "IE", "IT",
          "LT", "LU", "LV", "MT", "NL", "PL", "PT", "RO", "SE", "SI", "SK"}
    providers = [a for a in ann.values() if a.deployment_category != 3]
    assert len(providers) == 40 and sum(a.provider_country in eu for a in providers) == 3


def test_reference_markdown_line():
    reports, ann = load_reference_fixture()
    md = render_report(aggregate_corpus(reports, ann), "md")
    assert "machine-readable: 19/50 (38%)" in md.splitlines()
    jsonschema.validate(json.loads(render_report(aggregate_corpus(reports, ann))), SCHEMA)


def test_all_marked():
    reports = [ProvenanceReport(f"r{i}", frozenset({TechniqueHit(Technique.METADATA)})) for i in range(10)]
    assert aggregate_corpus(reports).pct_machine_readable == 100


def test_rounding_half_up():
    reports = [ProvenanceReport("a", frozenset({TechniqueHit(Technique.METADATA)})), ProvenanceReport("b"), ProvenanceReport("c")]
    assert aggregate_corpus(reports).pct_machine_readable == 33
    assert percent(1, 8) == 13  # 12.5 rounds up
    assert percent(2, 3) == 67
    assert percent(1, 200) == 1  # 0.5 rounds up


def test_empty_corpus():
    with pytest.raises(EmptyCorpus):
        aggregate_corpus([])


def test_breakdowns_only_annotated():
    reports = [ProvenanceReport("a"), ProvenanceReport("b")]
    s = aggregate_corpus(reports, {"a": CorpusAnnotation("a", True, 1, "P", "US")})
    assert s.by_category[1].n == 1 and s.n_visible == 1 and s.n_visible_assessed == 1


def test_markdown_sections():
    r = ProvenanceReport("a", frozenset({TechniqueHit(Technique.INVISIBLE_WATERMARK, "X")}))
    md = render_report([r], "md")
    assert "| a | yes | InvisibleWatermark(X) | unassessed |" in md
    for t in Technique:
        assert f"## {t.value}" in md
