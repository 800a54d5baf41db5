"""Image metadata: container-level extraction, AI-origin rules, embed and strip."""

from .inspect import (
    RULES_VERSION,
    AiOriginFinding,
    RuleConfig,
    classify_ai_origin,
    embed_ai_metadata,
    extract_records,
    strip_metadata,
)
from .records import MetadataRecord, Standard
from .xmp import DigitalSourceDeclaration

__all__ = [
    "RULES_VERSION",
    "AiOriginFinding",
    "DigitalSourceDeclaration",
    "MetadataRecord",
    "RuleConfig",
    "Standard",
    "classify_ai_origin",
    "embed_ai_metadata",
    "extract_records",
    "strip_metadata",
]
