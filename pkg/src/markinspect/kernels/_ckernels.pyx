# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner-loop kernels; mirrors ``_pykernels`` function for function."""

import numpy as np
cimport numpy as cnp
from libc.math cimport floor, fabs

cnp.import_array()


def haar_forward(const double[:, :] plane):
    cdef Py_ssize_t h = plane.shape[0] // 2, w = plane.shape[1] // 2
    cdef Py_ssize_t i, j
    cdef double a, b, c, d
    ll = np.empty((h, w), dtype=np.float64)
    lh = np.empty((h, w), dtype=np.float64)
    hl = np.empty((h, w), dtype=np.float64)
    hh = np.empty((h, w), dtype=np.float64)
    cdef double[:, :] vll = ll, vlh = lh, vhl = hl, vhh = hh
    for i in range(h):
        for j in range(w):
            a = plane[2 * i, 2 * j]
            b = plane[2 * i, 2 * j + 1]
            c = plane[2 * i + 1, 2 * j]
            d = plane[2 * i + 1, 2 * j + 1]
            vll[i, j] = (a + b + c + d) * 0.5
            vlh[i, j] = (a + b - c - d) * 0.5
            vhl[i, j] = (a - b + c - d) * 0.5
            vhh[i, j] = (a - b - c + d) * 0.5
    return ll, lh, hl, hh


def haar_inverse(const double[:, :] ll, const double[:, :] lh, const double[:, :] hl, const double[:, :] hh):
    cdef Py_ssize_t h = ll.shape[0], w = ll.shape[1]
    cdef Py_ssize_t i, j
    cdef double s, t, u, v
    out = np.empty((2 * h, 2 * w), dtype=np.float64)
    cdef double[:, :] o = out
    for i in range(h):
        for j in range(w):
            s = ll[i, j]
            t = lh[i, j]
            u = hl[i, j]
            v = hh[i, j]
            o[2 * i, 2 * j] = (s + t + u + v) * 0.5
            o[2 * i, 2 * j + 1] = (s + t - u - v) * 0.5
            o[2 * i + 1, 2 * j] = (s - t + u - v) * 0.5
            o[2 * i + 1, 2 * j + 1] = (s - t - u + v) * 0.5
    return out


def block_dct(const double[:, :] plane, const double[:, :] basis, bint inverse):
    cdef Py_ssize_t n = basis.shape[0]
    cdef Py_ssize_t h = plane.shape[0], w = plane.shape[1]
    cdef Py_ssize_t by, bx, i, j, k, y0, x0
    cdef double acc
    cdef double[:, :] m = np.empty((n, n), dtype=np.float64)
    cdef double[:, :] c = np.array(np.asarray(basis).T if inverse else np.asarray(basis), dtype=np.float64, order="C")
    out = np.empty((h, w), dtype=np.float64)
    cdef double[:, :] o = out
    for by in range(h // n):
        y0 = by * n
        for bx in range(w // n):
            x0 = bx * n
            # m = C @ block
            for i in range(n):
                for j in range(n):
                    acc = 0.0
                    for k in range(n):
                        acc = acc + c[i, k] * plane[y0 + k, x0 + j]
                    m[i, j] = acc
            # out = m @ C.T
            for i in range(n):
                for j in range(n):
                    acc = 0.0
                    for k in range(n):
                        acc = acc + m[i, k] * c[j, k]
                    o[y0 + i, x0 + j] = acc
    return out


def block_coefficients(const double[:, :] plane, const double[:, :] pattern):
    cdef Py_ssize_t n = pattern.shape[0]
    cdef Py_ssize_t ty = plane.shape[0] // n, tx = plane.shape[1] // n
    cdef Py_ssize_t a, b, i, j
    cdef double acc
    out = np.empty((ty, tx), dtype=np.float64)
    cdef double[:, :] o = out
    for a in range(ty):
        for b in range(tx):
            acc = 0.0
            for i in range(n):
                for j in range(n):
                    acc = acc + plane[a * n + i, b * n + j] * pattern[i, j]
            o[a, b] = acc
    return out


def shift_block_coefficients(const double[:, :] plane, const double[:, :] shifts, const double[:, :] pattern):
    cdef Py_ssize_t n = pattern.shape[0]
    cdef Py_ssize_t ty = shifts.shape[0], tx = shifts.shape[1]
    cdef Py_ssize_t a, b, i, j
    cdef double s
    out = np.array(plane, dtype=np.float64, copy=True)
    cdef double[:, :] o = out
    for a in range(ty):
        for b in range(tx):
            s = shifts[a, b]
            for i in range(n):
                for j in range(n):
                    o[a * n + i, b * n + j] += s * pattern[i, j]
    return out


cdef inline double _round_half_away(double x):
    if x >= 0:
        return floor(x + 0.5)
    return -floor(-x + 0.5)


def round_luma_shift(const double[:, :] dy, const double[:, :] pixel_pattern,
                     const double[:, :] headroom_up, const double[:, :] headroom_down):
    cdef Py_ssize_t m = pixel_pattern.shape[0]
    cdef Py_ssize_t h = dy.shape[0], w = dy.shape[1]
    cdef Py_ssize_t ty = h // m, tx = w // m
    cdef Py_ssize_t a, b, i, j, k, y, x
    cdef double r, p, step, nv
    flat_np = np.asarray(pixel_pattern).reshape(-1)
    order_np = np.argsort(-np.abs(flat_np), kind="stable").astype(np.intp)
    cdef Py_ssize_t[:] order = order_np
    cdef double[:] flat = np.ascontiguousarray(flat_np, dtype=np.float64)
    out = np.empty((h, w), dtype=np.int64)
    cdef long long[:, :] o = out
    cdef double v
    for y in range(h):
        for x in range(w):
            v = _round_half_away(dy[y, x])
            if v > headroom_up[y, x]:
                v = headroom_up[y, x]
            if v < -headroom_down[y, x]:
                v = -headroom_down[y, x]
            o[y, x] = <long long>v
    for a in range(ty):
        for b in range(tx):
            r = 0.0
            for k in range(m * m):
                y = a * m + k // m
                x = b * m + k % m
                r = r + (dy[y, x] - o[y, x]) * flat[k]
            for i in range(m * m):
                k = order[i]
                p = flat[k]
                if p == 0.0 or not (fabs(r) > fabs(p) * 0.5):
                    continue
                step = (1.0 if r > 0 else -1.0) * (1.0 if p > 0 else -1.0)
                y = a * m + k // m
                x = b * m + k % m
                nv = o[y, x] + step
                if nv > headroom_up[y, x] or nv < -headroom_down[y, x]:
                    continue
                if fabs(nv - dy[y, x]) > 1.0:
                    continue
                o[y, x] = <long long>nv
                r = r - step * p
    return out
