
import numpy as np
import pytest

from markinspect import kernels
from markinspect.blob import FileBlob
from markinspect.image import RasterImage, encode_raster
from markinspect.synth import noise_rgb, shapes_rgb, smooth_rgb  # noqa: F401  (re-exported for tests)

KERNEL_NAMES = [
    "haar_forward",
    "haar_inverse",
    "block_dct",
    "block_coefficients",
    "shift_block_coefficients",
    "round_luma_shift",
]


@pytest.fixture(params=sorted(kernels.backends()))
def backend(request, monkeypatch):
    """Run a test once per available kernel backend."""
    mod = kernels.backends()[request.param]
    for name in KERNEL_NAMES:
        monkeypatch.setattr(kernels, name, getattr(mod, name))
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def png_blob(img: RasterImage) -> FileBlob:
    return encode_raster(img, "PNG")
