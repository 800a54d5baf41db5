"""``markinspect`` command line.

Data goes to stdout or ``--out``; logs go to stderr.  Exit status: 0 success,
1 pipeline failure, 2 usage error.  Defaults for ``--registry``,
``--fp-store``, ``--rules``, ``--annotations`` and ``--jobs`` can be set in a
JSON config file given by ``--config`` or ``MARKINSPECT_CONFIG``.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .attacks import DEFAULT_GRID, TECHNIQUES, Attack, AttackKind, apply_attack, load_attack_grid, run_robustness_matrix
from .blob import FileBlob
from .c2pa import locate_jumbf, parse_manifest_store, probe_c2pa
from .containers import parse_containers
from .corpus import FixtureSpec, GroundTruth, generate_fixture_corpus
from .dwtdct import DwtDctParams, PayloadRegistry, WatermarkPayload, default_registry, dwtdct_detect, dwtdct_embed
from .errors import BadParams, MarkInspectError
from .fingerprint import RegistryStore, compute_phash, match_fingerprint, register_fingerprint
from .image import decode_raster, encode_raster
from .lsb import lsb_embed
from .metadata import DigitalSourceDeclaration, RuleConfig, classify_ai_origin, embed_ai_metadata, extract_records, strip_metadata
from .scanner import aggregate_corpus, load_annotations, reports_from_document, render_report, scan_corpus

log = logging.getLogger("markinspect")

CONFIG_KEYS = {"registry", "fp_store", "rules", "annotations", "jobs", "format"}


class UsageError(Exception):
    pass


def _load_config(path: str | None) -> dict:
    path = path or os.environ.get("MARKINSPECT_CONFIG")
    if not path:
        return {}
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    unknown = set(doc) - CONFIG_KEYS
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return doc


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
        log.info("wrote %s", out)
    else:
        sys.stdout.write(text)


def _json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def _check_distinct(src: str, dst: str) -> None:
    if Path(src).resolve() == Path(dst).resolve():
        raise UsageError("output path must differ from input (inputs are never modified)")


def _registry(args) -> PayloadRegistry:
    if args.registry:
        return PayloadRegistry.load(args.registry)
    return default_registry()


def _store(args, must_exist: bool = False) -> RegistryStore | None:
    if not args.fp_store:
        return None
    if must_exist and not Path(args.fp_store).exists():
        raise UsageError(f"fingerprint store {args.fp_store} does not exist")
    return RegistryStore(args.fp_store)


# -- subcommands ---------------------------------------------------------------------


def cmd_embed(args) -> int:
    _check_distinct(args.input, args.output)
    blob = FileBlob.read(args.input)
    if args.method == "metadata":
        out = embed_ai_metadata(blob, DigitalSourceDeclaration(args.tool, args.source_type))
    else:
        img = decode_raster(blob)
        if args.method == "lsb":
            payload = bytes.fromhex(args.payload_hex) if args.payload_hex else args.payload_text.encode("utf-8")
            img = lsb_embed(img, payload)
        else:
            if args.label:
                payload = _registry(args).lookup(args.label)
            elif args.payload_hex:
                payload = WatermarkPayload.from_hex(args.payload_hex)
            else:
                raise UsageError("embed dwtdct needs --payload-hex or --label")
            img = dwtdct_embed(img, payload, DwtDctParams(delta=args.delta))
        fmt = "JPEG" if args.output.lower().endswith((".jpg", ".jpeg")) else "PNG"
        out = encode_raster(img, fmt, quality=args.quality)
    out.write(args.output)
    log.info("embedded %s into %s", args.method, args.output)
    return 0


def cmd_detect(args) -> int:
    img = decode_raster(FileBlob.read(args.input))
    result = dwtdct_detect(img, _registry(args), DwtDctParams(delta=args.delta))
    _emit(_json(result.to_dict() | {"closest": result.details.get("closest")}), args.out)
    return 0


def cmd_inspect(args) -> int:
    blob = FileBlob.read(args.input)
    cmap = parse_containers(blob)
    records = extract_records(blob)
    rules = RuleConfig.load(args.rules) if args.rules else RuleConfig()
    boxes = []
    for stream in locate_jumbf(blob, cmap):
        try:
            boxes += [b.to_dict() for b in parse_manifest_store(stream.data)[0]]
        except MarkInspectError as exc:
            boxes.append({"error": f"{type(exc).__name__}: {exc}"})
    doc = {
        "format": blob.format.value,
        "containers": [e.to_dict() for e in cmap.entries],
        "records": [r.to_dict() for r in records],
        "ai_origin": classify_ai_origin(records, rules).to_dict(),
        "c2pa": probe_c2pa(blob, cmap).to_dict() | {"boxes": boxes},
    }
    _emit(_json(doc), args.out)
    return 0


def cmd_strip(args) -> int:
    _check_distinct(args.input, args.output)
    strip_metadata(FileBlob.read(args.input)).write(args.output)
    return 0


def cmd_attack(args) -> int:
    if args.attack_cmd == "apply":
        _check_distinct(args.input, args.output)
        spec = _RANGE_FLAG.get(args.kind)
        value = getattr(args, spec) if spec else None
        attack = Attack(AttackKind(args.kind), value)
        apply_attack(FileBlob.read(args.input), attack, args.seed).write(args.output)
        return 0
    truth = GroundTruth.load(args.corpus)
    grid = load_attack_grid(Path(args.grid).read_text(encoding="utf-8")) if args.grid else list(DEFAULT_GRID)
    registry = PayloadRegistry.load(Path(args.corpus) / "registry.json") if not args.registry else _registry(args)
    store_path = args.fp_store or Path(args.corpus) / "fingerprints.ndjson"
    store = RegistryStore(store_path) if Path(store_path).exists() else RegistryStore()
    techniques = args.techniques.split(",") if args.techniques else list(TECHNIQUES)
    matrix = run_robustness_matrix(truth.marked_items(), techniques, grid, registry, store, args.seed, args.jobs)
    if args.csv:
        Path(args.csv).write_text(matrix.to_csv(), encoding="utf-8")
    _emit(matrix.to_json(), args.out)
    return 0


_RANGE_FLAG = {
    AttackKind.JPEG_REENCODE.value: "quality",
    AttackKind.RESIZE.value: "scale",
    AttackKind.CENTER_CROP.value: "fraction",
    AttackKind.GAUSSIAN_NOISE.value: "sigma",
}


def cmd_scan(args) -> int:
    annotations = load_annotations(args.annotations) if args.annotations else {}
    rules = RuleConfig.load(args.rules) if args.rules else None
    reports = scan_corpus(args.path, _registry(args), _store(args, must_exist=True), annotations, args.jobs, rules)
    if not reports:
        raise BadParams(f"no PNG/JPEG files under {args.path}")
    _emit(render_report(reports, args.format), args.out)
    return 0


def cmd_aggregate(args) -> int:
    doc = json.loads(Path(args.scan).read_text(encoding="utf-8"))
    annotations = load_annotations(args.annotations) if args.annotations else {}
    summary = aggregate_corpus(reports_from_document(doc), annotations)
    _emit(render_report(summary, args.format), args.out)
    return 0


def cmd_fixtures(args) -> int:
    spec = FixtureSpec.default()
    if args.spec:
        spec = FixtureSpec.from_dict(json.loads(Path(args.spec).read_text(encoding="utf-8")))
    registry = PayloadRegistry.load(args.registry) if args.registry else None
    truth = generate_fixture_corpus(spec, args.out_dir, args.seed, registry)
    _emit(_json(truth.counts()), None)
    return 0


def cmd_hash(args) -> int:
    bits = compute_phash(decode_raster(FileBlob.read(args.input)))
    _emit(_json({"phash": f"{bits:016x}"}), args.out)
    return 0


def cmd_register(args) -> int:
    store = RegistryStore(args.fp_store)
    rec = register_fingerprint(store, decode_raster(FileBlob.read(args.input)), args.label, args.created_at)
    _emit(_json({"label": rec.source_label, "hex_bits": rec.hex_bits, "created_at": rec.created_at}), None)
    return 0


def cmd_match(args) -> int:
    store = _store(args, must_exist=True)
    m = match_fingerprint(store, decode_raster(FileBlob.read(args.input)), args.max_distance)
    _emit(_json({"match": None if m is None else m.to_dict()}), args.out)
    return 0


# -- parser ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="markinspect", description="Detect and test AI-provenance markings in images.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--config", help="JSON config with default paths (overrides MARKINSPECT_CONFIG)")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_, description=help_)
        sp.set_defaults(func=func)
        return sp

    def registry_flag(sp):
        sp.add_argument("--registry", help="payload registry JSON (default: bundled registry)")

    def out_flag(sp):
        sp.add_argument("--out", help="write output here instead of stdout")

    embed = add("embed", cmd_embed, "embed a marking into an image")
    esub = embed.add_subparsers(dest="method", required=True, metavar="METHOD")
    e_lsb = esub.add_parser("lsb", help="spatial LSB frame")
    g = e_lsb.add_mutually_exclusive_group(required=True)
    g.add_argument("--payload-hex")
    g.add_argument("--payload-text")
    e_dwt = esub.add_parser("dwtdct", help="DWT-DCT QIM watermark")
    g = e_dwt.add_mutually_exclusive_group()
    g.add_argument("--payload-hex", help="payload bits as hex")
    g.add_argument("--label", help="registry label whose payload to embed")
    registry_flag(e_dwt)
    e_dwt.add_argument("--delta", type=float, default=DwtDctParams().delta)
    e_md = esub.add_parser("metadata", help="XMP AI-origin declaration")
    e_md.add_argument("--tool", required=True, help="generator name for xmp:CreatorTool")
    e_md.add_argument("--source-type", default="trainedAlgorithmicMedia")
    for sp in (e_lsb, e_dwt, e_md):
        sp.add_argument("input")
        sp.add_argument("output")
        sp.add_argument("--quality", type=int, default=95, help="JPEG quality when output ends in .jpg")

    det = add("detect", cmd_detect, "detect a DWT-DCT watermark against a payload registry")
    det.add_argument("input")
    registry_flag(det)
    det.add_argument("--delta", type=float, default=DwtDctParams().delta)
    out_flag(det)

    ins = add("inspect", cmd_inspect, "dump containers, metadata records and C2PA structure")
    ins.add_argument("input")
    ins.add_argument("--rules", help="rule config JSON")
    out_flag(ins)

    st = add("strip", cmd_strip, "remove all metadata blocks, keeping pixels")
    st.add_argument("input")
    st.add_argument("output")

    att = add("attack", cmd_attack, "apply degradations or run the robustness matrix")
    asub = att.add_subparsers(dest="attack_cmd", required=True, metavar="ACTION")
    a_apply = asub.add_parser("apply", help="apply one attack to one file")
    a_apply.add_argument("kind", choices=[k.value for k in AttackKind])
    a_apply.add_argument("input")
    a_apply.add_argument("output")
    a_apply.add_argument("--quality", type=int)
    a_apply.add_argument("--scale", type=float)
    a_apply.add_argument("--fraction", type=float)
    a_apply.add_argument("--sigma", type=float)
    a_mat = asub.add_parser("matrix", help="robustness matrix over a fixture corpus")
    a_mat.add_argument("corpus", help="directory written by `markinspect fixtures`")
    a_mat.add_argument("--grid", help="attack grid JSON (default: built-in grid)")
    a_mat.add_argument("--techniques", help=f"comma list from {','.join(TECHNIQUES)}")
    a_mat.add_argument("--csv", help="also write the matrix as CSV")
    a_mat.add_argument("--jobs", type=int, default=1)
    a_mat.add_argument("--registry")
    a_mat.add_argument("--fp-store")
    out_flag(a_mat)
    for sp in (a_apply, a_mat):
        sp.add_argument("--seed", type=int, default=0)

    sc = add("scan", cmd_scan, "scan an image or directory and report provenance findings")
    sc.add_argument("path")
    registry_flag(sc)
    sc.add_argument("--fp-store", help="fingerprint store (NDJSON)")
    sc.add_argument("--annotations", help="annotation JSON or CSV keyed by image_id")
    sc.add_argument("--rules", help="rule config JSON")
    sc.add_argument("--jobs", type=int, default=None)
    sc.add_argument("--format", choices=["json", "md"], default=None)
    out_flag(sc)

    ag = add("aggregate", cmd_aggregate, "summarize a scan report")
    ag.add_argument("scan", help="JSON written by `markinspect scan`")
    ag.add_argument("--annotations")
    ag.add_argument("--format", choices=["json", "md"], default=None)
    out_flag(ag)

    fx = add("fixtures", cmd_fixtures, "generate a synthetic corpus with ground truth")
    fx.add_argument("out_dir")
    fx.add_argument("--spec", help="fixture spec JSON (default: built-in mix)")
    fx.add_argument("--seed", type=int, default=0)
    registry_flag(fx)

    h = add("hash", cmd_hash, "print the 64-bit perceptual hash")
    h.add_argument("input")
    out_flag(h)

    rg = add("register", cmd_register, "append an image fingerprint to a store")
    rg.add_argument("input")
    rg.add_argument("--fp-store", required=True)
    rg.add_argument("--label", required=True)
    rg.add_argument("--created-at", help="timestamp to record (default: now, UTC)")

    mt = add("match", cmd_match, "find the nearest stored fingerprint")
    mt.add_argument("input")
    mt.add_argument("--fp-store", required=True)
    mt.add_argument("--max-distance", type=int, default=10)
    out_flag(mt)
    return p


def _apply_config(args, config: dict) -> None:
    for key in CONFIG_KEYS:
        if hasattr(args, key) and getattr(args, key) is None and key in config:
            setattr(args, key, config[key])
    if getattr(args, "jobs", 1) is None:
        args.jobs = 1
    if getattr(args, "format", "json") is None:
        args.format = "json"


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors, 0 on --help
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(name)s: %(levelname)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        _apply_config(args, _load_config(args.config))
        if args.command == "attack" and args.attack_cmd == "apply":
            flag = _RANGE_FLAG.get(args.kind)
            if flag and getattr(args, flag) is None:
                raise UsageError(f"{args.kind} needs --{flag}")
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"markinspect: error: {exc}", file=sys.stderr)
        return 2
    except (MarkInspectError, OSError, ValueError, KeyError) as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
