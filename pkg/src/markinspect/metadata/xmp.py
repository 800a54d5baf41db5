"""XMP packet location, flattening to key/value records, and writing."""

from __future__ import annotations

import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from io import StringIO
from xml.sax.saxutils import quoteattr

from .records import MetadataRecord, Standard, warning

RDF_NS = "http://www.w3.org/1999/02/22-rdf-syntax-ns#"
KNOWN_PREFIXES = {
    RDF_NS: "rdf",
    "adobe:ns:meta/": "x",
    "http://ns.adobe.com/xap/1.0/": "xmp",
    "http://purl.org/dc/elements/1.1/": "dc",
    "http://iptc.org/std/Iptc4xmpExt/2008-02-29/": "Iptc4xmpExt",
    "http://iptc.org/std/Iptc4xmpCore/1.0/xmlns/": "Iptc4xmpCore",
    "http://ns.adobe.com/photoshop/1.0/": "photoshop",
    "http://ns.adobe.com/tiff/1.0/": "tiff",
    "http://ns.adobe.com/exif/1.0/": "exif",
    "http://purl.org/dc/terms/": "dcterms",
    "http://ns.adobe.com/xap/1.0/mm/": "xmpMM",
}
DIGITAL_SOURCE_TYPE_BASE = "http://cv.iptc.org/newscodes/digitalsourcetype/"

_BEGIN = re.compile(rb"<\?xpacket\s+begin=")
_END = re.compile(rb"<\?xpacket\s+end=[^>]*\?>")
_META_START = re.compile(rb"<x:xmpmeta[\s>]")
_META_END = re.compile(rb"</x:xmpmeta\s*>")


def find_packet(data: bytes) -> bytes | None:
    """Bytes from the xpacket begin PI through the end PI, if present."""
    m = _BEGIN.search(data)
    if m:
        e = _END.search(data, m.end())
        if e:
            return data[m.start() : e.end()]
    m = _META_START.search(data)
    if m:
        e = _META_END.search(data, m.end())
        if e:
            return data[m.start() : e.end()]
    return None


def parse_xmp(data: bytes) -> list[MetadataRecord]:
    packet = find_packet(data)
    if packet is None:
        return [warning("XMP", "no XMP packet found")]
    text = packet.decode("utf-8", errors="replace").lstrip("﻿")
    if "<!DOCTYPE" in text or "<!ENTITY" in text:
        return [warning("XMP", "DTDs are not allowed in XMP")]
    prefixes = dict(KNOWN_PREFIXES)
    try:
        root = None
        for event, item in ET.iterparse(StringIO(text), events=("start-ns", "start")):
            if event == "start-ns":
                prefix, uri = item
                prefixes.setdefault(uri, prefix or "ns")
            elif root is None:
                root = item
        if root is None:
            raise ET.ParseError("empty document")
    except ET.ParseError as exc:
        return [warning("XMP", f"malformed XML: {exc}")]
    records: list[MetadataRecord] = []
    for desc in root.iter(f"{{{RDF_NS}}}Description"):
        if _is_nested(desc, root):
            continue
        _flatten_node(desc, "", prefixes, records)
    return records


def _is_nested(desc, root) -> bool:
    # Descriptions directly under rdf:RDF are top level; others are structs
    for rdf in root.iter(f"{{{RDF_NS}}}RDF"):
        if desc in list(rdf):
            return False
    return True


def _qname(tag: str, prefixes: dict) -> str:
    if tag.startswith("{"):
        uri, local = tag[1:].split("}", 1)
        return f"{prefixes.get(uri, uri)}:{local}"
    return tag


def _flatten_node(node, path: str, prefixes: dict, out: list) -> None:
    for attr, value in sorted(node.attrib.items()):
        if attr.startswith(f"{{{RDF_NS}}}"):
            continue
        out.append(MetadataRecord(Standard.XMP, path + _qname(attr, prefixes), value))
    for child in node:
        _flatten_property(child, path, prefixes, out)


def _flatten_property(prop, path: str, prefixes: dict, out: list) -> None:
    key = path + _qname(prop.tag, prefixes)
    resource = prop.get(f"{{{RDF_NS}}}resource")
    if resource is not None:
        out.append(MetadataRecord(Standard.XMP, key, resource))
        return
    children = list(prop)
    if not children:
        out.append(MetadataRecord(Standard.XMP, key, (prop.text or "").strip()))
        return
    if prop.get(f"{{{RDF_NS}}}parseType") == "Resource":
        _flatten_node(prop, key + "/", prefixes, out)
        return
    for child in children:
        local = _qname(child.tag, prefixes)
        if local in ("rdf:Seq", "rdf:Bag", "rdf:Alt"):
            for li in child:
                if list(li):
                    _flatten_node(li, key + "/", prefixes, out)
                else:
                    out.append(MetadataRecord(Standard.XMP, key, (li.text or "").strip()))
        elif local == "rdf:Description":
            _flatten_node(child, key + "/", prefixes, out)
        else:
            _flatten_property(child, key + "/", prefixes, out)


@dataclass(frozen=True)
class DigitalSourceDeclaration:
    tool_name: str
    source_type: str = "trainedAlgorithmicMedia"

    @property
    def source_type_uri(self) -> str:
        if "://" in self.source_type:
            return self.source_type
        return DIGITAL_SOURCE_TYPE_BASE + self.source_type


def build_xmp_packet(decl: DigitalSourceDeclaration) -> bytes:
    body = (
        '<?xpacket begin="﻿" id="W5M0MpCehiHzreSzNTczkc9d"?>\n'
        '<x:xmpmeta xmlns:x="adobe:ns:meta/">\n'
        f' <rdf:RDF xmlns:rdf="{RDF_NS}">\n'
        '  <rdf:Description rdf:about=""\n'
        '    xmlns:xmp="http://ns.adobe.com/xap/1.0/"\n'
        '    xmlns:Iptc4xmpExt="http://iptc.org/std/Iptc4xmpExt/2008-02-29/"\n'
        f"    xmp:CreatorTool={quoteattr(decl.tool_name)}\n"
        f"    Iptc4xmpExt:DigitalSourceType={quoteattr(decl.source_type_uri)}/>\n"
        " </rdf:RDF>\n"
        "</x:xmpmeta>\n"
        '<?xpacket end="w"?>'
    )
    return body.encode("utf-8")
