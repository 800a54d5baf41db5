from __future__ import annotations

import enum
from dataclasses import dataclass


class Standard(str, enum.Enum):
    EXIF = "EXIF"
    XMP = "XMP"
    IPTC = "IPTC"
    PNG_TEXT = "PngText"
    C2PA_POINTER = "C2paPointer"
    WARNING = "Warning"  # a malformed sub-block that was skipped


@dataclass(frozen=True)
class MetadataRecord:
    standard: Standard
    key: str
    value: str

    def __post_init__(self):
        if not self.key:
            raise ValueError("metadata record key must be non-empty")
        object.__setattr__(self, "standard", Standard(self.standard))

    @property
    def local_name(self) -> str:
        """Key without namespace prefix or struct path, e.g. ``CreatorTool``."""
        return self.key.rsplit("/", 1)[-1].rsplit(":", 1)[-1]

    def to_dict(self) -> dict:
        return {"standard": self.standard.value, "key": self.key, "value": self.value}

    @classmethod
    def from_dict(cls, d: dict) -> "MetadataRecord":
        return cls(Standard(d["standard"]), d["key"], d["value"])


def warning(where: str, message: str) -> MetadataRecord:
    return MetadataRecord(Standard.WARNING, where, message)
