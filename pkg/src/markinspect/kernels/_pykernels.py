"""Numpy implementations of the inner-loop kernels.

Same signatures as the compiled ``_ckernels`` module; used when the
extension is not built or MARKINSPECT_PURE_PYTHON is set.
"""

import numpy as np


def haar_forward(plane):
    a = plane[0::2, 0::2]
    b = plane[0::2, 1::2]
    c = plane[1::2, 0::2]
    d = plane[1::2, 1::2]
    ll = (a + b + c + d) * 0.5
    lh = (a + b - c - d) * 0.5
    hl = (a - b + c - d) * 0.5
    hh = (a - b - c + d) * 0.5
    return ll, lh, hl, hh


def haar_inverse(ll, lh, hl, hh):
    h, w = ll.shape
    out = np.empty((2 * h, 2 * w), dtype=np.float64)
    out[0::2, 0::2] = (ll + lh + hl + hh) * 0.5
    out[0::2, 1::2] = (ll + lh - hl - hh) * 0.5
    out[1::2, 0::2] = (ll - lh + hl - hh) * 0.5
    out[1::2, 1::2] = (ll - lh - hl + hh) * 0.5
    return out


def _tiles(plane, n):
    h, w = plane.shape
    return plane.reshape(h // n, n, w // n, n).transpose(0, 2, 1, 3)


def block_dct(plane, basis, inverse):
    """Apply the 2D transform ``basis`` to every n x n tile of ``plane``."""
    n = basis.shape[0]
    t = _tiles(np.asarray(plane, dtype=np.float64), n)
    if inverse:
        out = np.einsum("ki,abkl,lj->abij", basis, t, basis)
    else:
        out = np.einsum("ik,abkl,jl->abij", basis, t, basis)
    h, w = plane.shape
    return np.ascontiguousarray(out.transpose(0, 2, 1, 3).reshape(h, w))


def block_coefficients(plane, pattern):
    """Inner product of each n x n tile with ``pattern`` -> (tiles_y, tiles_x)."""
    n = pattern.shape[0]
    h, w = plane.shape
    t = _tiles(np.asarray(plane[: h - h % n, : w - w % n], dtype=np.float64), n)
    return np.einsum("abij,ij->ab", t, pattern)


def shift_block_coefficients(plane, shifts, pattern):
    """Return a copy of ``plane`` with ``shifts[a, b] * pattern`` added to tile (a, b)."""
    n = pattern.shape[0]
    out = np.array(plane, dtype=np.float64, copy=True)
    ty, tx = shifts.shape
    view = out[: ty * n, : tx * n].reshape(ty, n, tx, n)
    view += shifts[:, None, :, None] * pattern[None, :, None, :]
    return out


def round_luma_shift(dy, pixel_pattern, headroom_up, headroom_down):
    """Integer per-pixel luma change approximating the float change ``dy``.

    Each tile of ``dy`` is rounded half away from zero (within headroom),
    then pixels are nudged by +-1, largest ``|pixel_pattern|`` first, while
    that brings the tile's inner product with the pattern closer to the
    unrounded value.  No pixel moves more than 1 away from ``dy``.
    """
    m = pixel_pattern.shape[0]
    h, w = dy.shape
    ty, tx = h // m, w // m
    d = np.sign(dy) * np.floor(np.abs(dy) + 0.5)
    d = np.clip(d, -headroom_down, headroom_up)
    flat = pixel_pattern.reshape(-1)
    order = np.argsort(-np.abs(flat), kind="stable")

    def tiles(a):
        return a[: ty * m, : tx * m].reshape(ty, m, tx, m).transpose(0, 2, 1, 3).reshape(ty, tx, m * m)

    td, tdy = tiles(d).copy(), tiles(dy)
    tup, tdown = tiles(headroom_up), tiles(headroom_down)
    resid = np.einsum("abk,k->ab", tdy - td, flat)
    for k in order:
        p = flat[k]
        if p == 0.0:
            continue
        step = np.sign(resid) * np.sign(p)
        new = td[:, :, k] + step
        ok = (np.abs(resid) > abs(p) * 0.5) & (step != 0)
        ok &= (new <= tup[:, :, k]) & (new >= -tdown[:, :, k])
        ok &= np.abs(new - tdy[:, :, k]) <= 1.0
        td[:, :, k] = np.where(ok, new, td[:, :, k])
        resid = resid - np.where(ok, step * p, 0.0)
    out = d.copy()
    out[: ty * m, : tx * m] = td.reshape(ty, tx, m, m).transpose(0, 2, 1, 3).reshape(ty * m, tx * m)
    return out.astype(np.int64)
