"""One-level orthonormal Haar DWT and orthonormal block DCT-II.

Both transforms preserve energy, so quantisation step sizes mean the same
thing in the coefficient domain as in the sample domain.  For a 2x2 block
``(a, b; c, d)`` the Haar analysis is::

    ll = (a + b + c + d) / 2      lh = (a + b - c - d) / 2
    hl = (a - b + c - d) / 2      hh = (a - b - c + d) / 2
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import kernels
from .errors import BadBlockSize, DimensionMismatch, EmptyPlane


@dataclass(frozen=True, eq=False)
class SubbandSet:
    ll: np.ndarray
    lh: np.ndarray
    hl: np.ndarray
    hh: np.ndarray

    def __post_init__(self):
        shapes = {b.shape for b in (self.ll, self.lh, self.hl, self.hh)}
        if len(shapes) != 1 or len(next(iter(shapes))) != 2:
            raise DimensionMismatch(f"subband shapes differ: {sorted(shapes)}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.ll.shape

    def bands(self):
        return self.ll, self.lh, self.hl, self.hh


def _as_plane(plane) -> np.ndarray:
    arr = np.ascontiguousarray(plane, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionMismatch(f"expected a 2D plane, got shape {arr.shape}")
    if arr.size == 0:
        raise EmptyPlane("plane has no samples")
    return arr


def haar_dwt2_forward(plane) -> SubbandSet:
    arr = _as_plane(plane)
    h, w = arr.shape
    if h % 2 or w % 2:
        raise DimensionMismatch(f"Haar DWT needs even dimensions, got {w}x{h}")
    return SubbandSet(*kernels.haar_forward(arr))


def haar_dwt2_inverse(subbands: SubbandSet) -> np.ndarray:
    bands = [np.ascontiguousarray(b, dtype=np.float64) for b in subbands.bands()]
    if len({b.shape for b in bands}) != 1:
        raise DimensionMismatch("subband shapes differ")
    return kernels.haar_inverse(*bands)


def crop_even(plane: np.ndarray) -> np.ndarray:
    """Drop one trailing row/column where a dimension is odd."""
    h, w = plane.shape[:2]
    return plane[: h - h % 2, : w - w % 2]


@lru_cache(maxsize=None)
def dct_matrix(n: int) -> np.ndarray:
    """Orthonormal DCT-II matrix; row k is the k-th cosine basis vector."""
    k = np.arange(n)[:, None]
    i = np.arange(n)[None, :]
    m = np.cos(np.pi * (2 * i + 1) * k / (2 * n)) * np.sqrt(2.0 / n)
    m[0, :] = np.sqrt(1.0 / n)
    m.flags.writeable = False
    return m


def dct_basis_pattern(n: int, row: int, col: int) -> np.ndarray:
    """Spatial pattern whose inner product with a block gives coefficient (row, col)."""
    c = dct_matrix(n)
    return np.ascontiguousarray(np.outer(c[row], c[col]))


def _check_block(block) -> np.ndarray:
    arr = np.ascontiguousarray(block, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] not in (4, 8):
        raise BadBlockSize(f"block must be 4x4 or 8x8, got shape {arr.shape}")
    return arr


def dct2_block_forward(block) -> np.ndarray:
    arr = _check_block(block)
    return kernels.block_dct(arr, dct_matrix(arr.shape[0]), False)


def dct2_block_inverse(coeffs) -> np.ndarray:
    arr = _check_block(coeffs)
    return kernels.block_dct(arr, dct_matrix(arr.shape[0]), True)


def dct2(plane) -> np.ndarray:
    """Orthonormal 2D DCT-II of a whole rectangular plane."""
    arr = _as_plane(plane)
    return dct_matrix(arr.shape[0]) @ arr @ dct_matrix(arr.shape[1]).T
