"""Seeded synthetic test images."""

from __future__ import annotations

import numpy as np

from .image import Channels, RasterImage


def smooth_rgb(width: int = 256, height: int = 256, seed: int = 0) -> RasterImage:
    """Gradient plus low-frequency waves, no saturated samples."""
    r = np.random.default_rng(seed)
    y, x = np.mgrid[0:height, 0:width] / max(width, height)
    chans = []
    for _ in range(3):
        fx, fy, ph = r.uniform(0.5, 3.0), r.uniform(0.5, 3.0), r.uniform(0, 6.28)
        base = 128 + 60 * np.sin(2 * np.pi * (fx * x + fy * y) + ph)
        base += r.uniform(-40, 40) * (x - 0.5)
        chans.append(base)
    arr = np.clip(np.stack(chans, axis=-1), 10, 245).round().astype(np.uint8)
    return RasterImage(arr, Channels.RGB)


def noise_rgb(width: int = 256, height: int = 256, seed: int = 0) -> RasterImage:
    r = np.random.default_rng(seed)
    return RasterImage(r.integers(0, 256, (height, width, 3), dtype=np.uint8), Channels.RGB)


def shapes_rgb(width: int = 256, height: int = 256, seed: int = 0) -> RasterImage:
    """Soft-edged discs and rectangles over a gradient, with mild sensor-like noise."""
    r = np.random.default_rng(seed)
    y, x = np.mgrid[0:height, 0:width].astype(np.float64)
    canvas = np.empty((height, width, 3))
    top, bottom = r.uniform(40, 210, 3), r.uniform(40, 210, 3)
    t = (y / max(height - 1, 1))[..., None]
    canvas[:] = top * (1 - t) + bottom * t
    for _ in range(int(r.integers(3, 7))):
        colour = r.uniform(30, 225, 3)
        cx, cy = r.uniform(0, width), r.uniform(0, height)
        if r.random() < 0.5:
            rad = r.uniform(0.08, 0.3) * min(width, height)
            dist = np.hypot(x - cx, y - cy) - rad
        else:
            hw, hh = r.uniform(0.05, 0.25) * width, r.uniform(0.05, 0.25) * height
            dist = np.maximum(np.abs(x - cx) - hw, np.abs(y - cy) - hh)
        alpha = np.clip(0.5 - dist / 3.0, 0.0, 1.0)[..., None]
        canvas = canvas * (1 - alpha) + colour * alpha
    canvas += r.normal(0.0, 1.5, canvas.shape)
    arr = np.clip(canvas, 8, 247).round().astype(np.uint8)
    return RasterImage(arr, Channels.RGB)


KINDS = {"gradient": smooth_rgb, "noise": noise_rgb, "shapes": shapes_rgb}
