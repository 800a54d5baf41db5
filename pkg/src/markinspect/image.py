"""Raster images: decoding, encoding and colour/size utilities.

Pixel codecs are delegated to Pillow.  Everything above the pixel layer
(container layout, metadata, marks) is handled by this package.
"""

from __future__ import annotations

import enum
import io
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .blob import FileBlob, ImageFormat
from .containers import parse_containers
from .errors import CorruptContainer, CorruptStream, EncodeFailure, UnsupportedFormat

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])

# SOF0 baseline, SOF1 extended sequential huffman
_SEQUENTIAL_SOF = {0xC0, 0xC1}
_OTHER_SOF = {0xC2, 0xC3, 0xC5, 0xC6, 0xC7, 0xC9, 0xCA, 0xCB, 0xCD, 0xCE, 0xCF}


class Channels(str, enum.Enum):
    GRAY = "Gray"
    RGB = "RGB"
    RGBA = "RGBA"

    @property
    def count(self) -> int:
        return {"Gray": 1, "RGB": 3, "RGBA": 4}[self.value]

    @property
    def color_count(self) -> int:
        """Channels carrying colour, i.e. excluding alpha."""
        return 3 if self is Channels.RGBA else self.count


@dataclass(frozen=True, eq=False)
class RasterImage:
    """Decoded 8-bit pixels stored as a read-only (height, width, channels) array."""

    samples: np.ndarray
    channels: Channels

    def __post_init__(self):
        arr = np.asarray(self.samples)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3 or arr.shape[2] != self.channels.count:
            raise ValueError(
                f"samples shape {arr.shape} does not match {self.channels.value}"
            )
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("image must be at least 1x1")
        if arr.dtype != np.uint8:
            raise ValueError(f"samples must be uint8, got {arr.dtype}")
        arr = np.array(arr, dtype=np.uint8, order="C", copy=True)
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "RasterImage":
        arr = np.asarray(arr)
        n = 1 if arr.ndim == 2 else arr.shape[2]
        chan = {1: Channels.GRAY, 3: Channels.RGB, 4: Channels.RGBA}.get(n)
        if chan is None:
            raise ValueError(f"cannot infer channel layout from shape {arr.shape}")
        return cls(arr, chan)

    @property
    def width(self) -> int:
        return self.samples.shape[1]

    @property
    def height(self) -> int:
        return self.samples.shape[0]

    def with_samples(self, samples: np.ndarray) -> "RasterImage":
        return RasterImage(samples, self.channels)

    def __eq__(self, other):
        if not isinstance(other, RasterImage):
            return NotImplemented
        return self.channels is other.channels and np.array_equal(
            self.samples, other.samples
        )

    def __repr__(self):
        return f"RasterImage({self.width}x{self.height}, {self.channels.value})"


def decode_raster(blob: FileBlob) -> RasterImage:
    if blob.format is ImageFormat.UNKNOWN:
        raise UnsupportedFormat("not a PNG or JPEG stream")
    try:
        cmap = parse_containers(blob)
    except CorruptContainer as exc:
        raise CorruptStream(str(exc)) from exc
    if blob.format is ImageFormat.JPEG:
        sofs = {e.type_code for e in cmap.entries} & (_SEQUENTIAL_SOF | _OTHER_SOF)
        if not sofs:
            raise CorruptStream("JPEG has no frame header")
        if sofs - _SEQUENTIAL_SOF:
            raise UnsupportedFormat("only baseline sequential JPEG is supported")
    try:
        with Image.open(io.BytesIO(blob.data)) as im:
            im.load()
            return _from_pil(im, blob.format)
    except (OSError, SyntaxError, ValueError) as exc:
        raise CorruptStream(f"pixel data could not be decoded: {exc}") from exc


def _from_pil(im: Image.Image, fmt: ImageFormat) -> RasterImage:
    mode = im.mode
    if fmt is ImageFormat.JPEG:
        return RasterImage(np.asarray(im.convert("RGB")), Channels.RGB)
    if mode in ("1", "L"):
        return RasterImage(np.asarray(im.convert("L")), Channels.GRAY)
    if mode in ("I;16", "I;16B", "I;16L", "I"):
        arr = np.asarray(im, dtype=np.uint32) >> 8
        return RasterImage(arr.astype(np.uint8), Channels.GRAY)
    if mode == "P":
        has_alpha = "transparency" in im.info
        im = im.convert("RGBA" if has_alpha else "RGB")
        mode = im.mode
    if mode in ("LA", "RGBA", "PA"):
        return RasterImage(np.asarray(im.convert("RGBA")), Channels.RGBA)
    if mode == "RGB":
        return RasterImage(np.asarray(im), Channels.RGB)
    raise UnsupportedFormat(f"unsupported PNG pixel mode {mode}")


def encode_raster(
    img: RasterImage, format: ImageFormat | str, quality: int | None = None
) -> FileBlob:
    """Encode pixels as PNG (lossless) or baseline JPEG.

    JPEG quality follows the IJG scaling of the standard quantisation tables;
    values outside 1..100 are clamped.  Alpha is dropped for JPEG.
    """
    fmt = ImageFormat(format)
    if img.width < 1 or img.height < 1:
        raise EncodeFailure("cannot encode a zero-sized image")
    arr = img.samples
    buf = io.BytesIO()
    if fmt is ImageFormat.PNG:
        pil = Image.fromarray(arr[:, :, 0] if img.channels is Channels.GRAY else arr)
        pil.save(buf, "PNG", compress_level=6, optimize=False)
    elif fmt is ImageFormat.JPEG:
        q = 75 if quality is None else min(100, max(1, int(quality)))
        if img.channels is Channels.GRAY:
            pil = Image.fromarray(arr[:, :, 0])
        else:
            pil = Image.fromarray(np.ascontiguousarray(arr[:, :, :3]))
        pil.save(buf, "JPEG", quality=q, optimize=False, progressive=False, subsampling=0)
    else:
        raise EncodeFailure(f"cannot encode to {fmt.value}")
    return FileBlob(buf.getvalue())


def rgb_to_luma(img: RasterImage) -> np.ndarray:
    """BT.601 luma as a float64 (height, width) plane."""
    s = img.samples.astype(np.float64)
    if img.channels is Channels.GRAY:
        return s[:, :, 0].copy()
    return s[:, :, :3] @ LUMA_WEIGHTS


def round_to_uint8(values: np.ndarray) -> np.ndarray:
    """Clamp to [0, 255] and round half away from zero."""
    return np.floor(np.clip(values, 0.0, 255.0) + 0.5).astype(np.uint8)


def _triangle_weights(n_in: int, n_out: int) -> np.ndarray:
    # antialiased bilinear: triangle kernel widened by the downscale factor
    scale = n_in / n_out
    support = max(scale, 1.0)
    centers = (np.arange(n_out) + 0.5) * scale
    src = np.arange(n_in) + 0.5
    w = 1.0 - np.abs(src[None, :] - centers[:, None]) / support
    np.clip(w, 0.0, None, out=w)
    w /= w.sum(axis=1, keepdims=True)
    return w


def resize_plane(plane: np.ndarray, width: int, height: int) -> np.ndarray:
    """Bilinear resampling of one or more float planes, shape (h, w[, c])."""
    wy = _triangle_weights(plane.shape[0], height)
    wx = _triangle_weights(plane.shape[1], width)
    out = np.tensordot(wy, plane, axes=(1, 0))
    out = np.tensordot(wx, out, axes=(1, 1))
    return np.swapaxes(out, 0, 1)


def resize_bilinear(img: RasterImage, width: int, height: int) -> RasterImage:
    if width < 1 or height < 1:
        raise ValueError("target size must be at least 1x1")
    out = resize_plane(img.samples.astype(np.float64), width, height)
    return img.with_samples(round_to_uint8(out))


def psnr(a: RasterImage, b: RasterImage) -> float:
    if a.samples.shape != b.samples.shape:
        raise ValueError("images differ in shape")
    mse = np.mean((a.samples.astype(np.float64) - b.samples.astype(np.float64)) ** 2)
    if mse == 0:
        return float("inf")
    return float(10.0 * np.log10(255.0**2 / mse))
