"""Raw file bytes tagged with a container format sniffed from magic bytes."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
JPEG_SOI = b"\xff\xd8"


class ImageFormat(str, enum.Enum):
    PNG = "PNG"
    JPEG = "JPEG"
    UNKNOWN = "Unknown"


def sniff_format(data: bytes) -> ImageFormat:
    if data.startswith(PNG_SIGNATURE):
        return ImageFormat.PNG
    if data.startswith(JPEG_SOI):
        return ImageFormat.JPEG
    return ImageFormat.UNKNOWN


@dataclass(frozen=True)
class FileBlob:
    data: bytes
    format: ImageFormat = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "data", bytes(self.data))
        object.__setattr__(self, "format", sniff_format(self.data))

    def __len__(self) -> int:
        return len(self.data)

    @classmethod
    def read(cls, path: str | Path) -> "FileBlob":
        return cls(Path(path).read_bytes())

    def write(self, path: str | Path) -> None:
        Path(path).write_bytes(self.data)
