# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled response-map kernels.

Semantics mirror ``_fallback`` operation for operation: same hash-noise
chain, same per-cell accumulation order, same nearest-neighbor sampling
rules.  Scores agree with the fallback to floating-point rounding (libm vs
numpy ufunc differences of a few ulp); each backend is bit-deterministic on
its own.
"""

from libc.math cimport exp, sqrt, log, cos, floor
from libc.stdint cimport uint64_t, int64_t

import numpy as np

cdef uint64_t _M1 = 0xBF58476D1CE4E5B9
cdef uint64_t _M2 = 0x94D049BB133111EB
cdef uint64_t _GOLD = 0x9E3779B97F4A7C15
cdef uint64_t _SEED_TWEAK = 0xD1B54A32D192ED03
cdef double _INV_2_53 = 2.0 ** -53
cdef double _TWO_PI = 6.283185307179586476925287


cdef inline uint64_t _fin(uint64_t z) nogil:
    z ^= z >> 30
    z *= _M1
    z ^= z >> 27
    z *= _M2
    z ^= z >> 31
    return z


cdef inline uint64_t _frame_key(int64_t seed, int64_t frame_index) nogil:
    cdef uint64_t h = _fin((<uint64_t> seed) ^ _SEED_TWEAK)
    return _fin(h + _GOLD * (<uint64_t> frame_index))


cdef inline double _noise_from(uint64_t hx, int64_t y) nogil:
    cdef uint64_t h = _fin(hx + _GOLD * (<uint64_t> y))
    cdef uint64_t ha = _fin(h + _GOLD)
    cdef uint64_t hb = _fin(h + _GOLD * 2)
    cdef double u1 = <double> ((ha >> 11) + 1) * _INV_2_53
    cdef double u2 = <double> (hb >> 11) * _INV_2_53
    return sqrt(-2.0 * log(u1)) * cos(_TWO_PI * u2)


def cell_noise(seed, frame_index, xs, ys):
    """Standard-normal noise field addressed by integer pixel coordinate."""
    xs_arr = np.ascontiguousarray(np.asarray(xs, dtype=np.int64).ravel())
    ys_arr = np.ascontiguousarray(np.asarray(ys, dtype=np.int64).ravel())
    cdef int64_t[::1] xv = xs_arr
    cdef int64_t[::1] yv = ys_arr
    out_arr = np.empty(xs_arr.shape[0], dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef uint64_t h0 = _frame_key(seed, frame_index)
    cdef Py_ssize_t i
    with nogil:
        for i in range(xv.shape[0]):
            out[i] = _noise_from(_fin(h0 + _GOLD * (<uint64_t> xv[i])), yv[i])
    return out_arr.reshape(np.shape(xs))


cdef void _gauss_rect_fill(double[:, ::1] out, int64_t x0, int64_t y0,
                           double[::1] px, double[::1] py, double[::1] amps,
                           double[::1] inv2w2, double noise_std,
                           uint64_t h0, double lo, double hi) nogil:
    cdef Py_ssize_t rows = out.shape[0], cols = out.shape[1]
    cdef Py_ssize_t r, c, p, np_ = px.shape[0]
    cdef int64_t x, y
    cdef double acc, dx, dy
    cdef uint64_t hx
    for r in range(rows):
        y = y0 + r
        for c in range(cols):
            x = x0 + c
            acc = 0.0
            for p in range(np_):
                if amps[p] == 0.0:
                    continue
                dx = (<double> x) - px[p]
                dy = (<double> y) - py[p]
                acc += amps[p] * exp(-(dx * dx + dy * dy) * inv2w2[p])
            if noise_std != 0.0:
                hx = _fin(h0 + _GOLD * (<uint64_t> x))
                acc += noise_std * _noise_from(hx, y)
            if acc < lo:
                acc = lo
            elif acc > hi:
                acc = hi
            out[r, c] = acc


def gauss_response_maps(centers_x, centers_y, peaks_x, peaks_y, amps, widths,
                        noise_std, seed, frame_index, radius):
    """Response maps of a synthetic peak-sum surface, one per center."""
    cdef int64_t[::1] cx = np.ascontiguousarray(centers_x, dtype=np.int64)
    cdef int64_t[::1] cy = np.ascontiguousarray(centers_y, dtype=np.int64)
    cdef double[::1] px = np.ascontiguousarray(peaks_x, dtype=np.float64)
    cdef double[::1] py = np.ascontiguousarray(peaks_y, dtype=np.float64)
    cdef double[::1] am = np.ascontiguousarray(amps, dtype=np.float64)
    w_arr = np.ascontiguousarray(widths, dtype=np.float64)
    inv_arr = 1.0 / (2.0 * w_arr * w_arr)
    cdef double[::1] inv2w2 = np.ascontiguousarray(inv_arr, dtype=np.float64)
    cdef int64_t rad = radius
    cdef Py_ssize_t n = cx.shape[0], side = 2 * rad + 1, i
    out_arr = np.empty((n, side, side), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef double ns = noise_std
    cdef uint64_t h0 = _frame_key(seed, frame_index)
    cdef double inf = float("inf")
    with nogil:
        for i in range(n):
            _gauss_rect_fill(out[i], cx[i] - rad, cy[i] - rad,
                             px, py, am, inv2w2, ns, h0, 0.0, inf)
    return out_arr


def render_intensity(width, height, peaks_x, peaks_y, amps, widths,
                     noise_std, seed, frame_index):
    """Grayscale frame of the same surface, clipped into [0, 1]."""
    cdef double[::1] px = np.ascontiguousarray(peaks_x, dtype=np.float64)
    cdef double[::1] py = np.ascontiguousarray(peaks_y, dtype=np.float64)
    cdef double[::1] am = np.ascontiguousarray(amps, dtype=np.float64)
    w_arr = np.ascontiguousarray(widths, dtype=np.float64)
    inv_arr = 1.0 / (2.0 * w_arr * w_arr)
    cdef double[::1] inv2w2 = np.ascontiguousarray(inv_arr, dtype=np.float64)
    out_arr = np.empty((int(height), int(width)), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double ns = noise_std
    cdef uint64_t h0 = _frame_key(seed, frame_index)
    with nogil:
        _gauss_rect_fill(out, 0, 0, px, py, am, inv2w2, ns, h0, 0.0, 1.0)
    return out_arr


def patch_offsets(size, n_samples):
    """Integer sample offsets for nearest-neighbor rescale of a patch axis."""
    cdef double s = size
    cdef Py_ssize_t n = n_samples, k
    out_arr = np.empty(n, dtype=np.int64)
    cdef int64_t[::1] out = out_arr
    for k in range(n):
        out[k] = <int64_t> floor(-s * 0.5 + (k + 0.5) * s / n + 0.5)
    return out_arr


def extract_patch(frame, cx, cy, size_w, size_h, out_w, out_h):
    """Nearest-neighbor sample a (out_h, out_w) patch centered at (cx, cy)."""
    cdef double[:, ::1] fr = np.ascontiguousarray(frame, dtype=np.float64)
    cdef int64_t[::1] ox = patch_offsets(size_w, out_w)
    cdef int64_t[::1] oy = patch_offsets(size_h, out_h)
    cdef Py_ssize_t h = fr.shape[0], w = fr.shape[1], r, c
    cdef int64_t icx = cx, icy = cy, sx, sy
    out_arr = np.empty((int(out_h), int(out_w)), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    for r in range(<Py_ssize_t> out_h):
        sy = icy + oy[r]
        if sy < 0:
            sy = 0
        elif sy > h - 1:
            sy = h - 1
        for c in range(<Py_ssize_t> out_w):
            sx = icx + ox[c]
            if sx < 0:
                sx = 0
            elif sx > w - 1:
                sx = w - 1
            out[r, c] = fr[sy, sx]
    return out_arr


def ncc_response_maps(frame, patch, centers_x, centers_y, radius, size_w, size_h):
    """Normalized-cross-correlation response maps, one per center."""
    cdef double[:, ::1] fr = np.ascontiguousarray(frame, dtype=np.float64)
    cdef double[:, ::1] b = np.ascontiguousarray(patch, dtype=np.float64)
    cdef int64_t[::1] cx = np.ascontiguousarray(centers_x, dtype=np.int64)
    cdef int64_t[::1] cy = np.ascontiguousarray(centers_y, dtype=np.int64)
    cdef int64_t rad = radius
    cdef Py_ssize_t h = fr.shape[0], w = fr.shape[1]
    cdef Py_ssize_t ph = b.shape[0], pw = b.shape[1]
    cdef double npx = <double> (ph * pw)
    cdef int64_t[::1] offx = patch_offsets(size_w, pw)
    cdef int64_t[::1] offy = patch_offsets(size_h, ph)
    cdef Py_ssize_t n = cx.shape[0], side = 2 * rad + 1
    out_arr = np.empty((n, side, side), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr

    cdef double sb = 0.0, mean_b, vb = 0.0
    cdef Py_ssize_t i, j, r, c, m
    for j in range(ph):
        for i in range(pw):
            sb += b[j, i]
    mean_b = sb / npx
    for j in range(ph):
        for i in range(pw):
            vb += (b[j, i] - mean_b) * (b[j, i] - mean_b)

    cdef int64_t bx, by, sx, sy
    cdef double sa, mean_a, cov, va, av, bv, denom, rr
    with nogil:
        for m in range(n):
            for r in range(side):
                by = cy[m] - rad + r
                for c in range(side):
                    bx = cx[m] - rad + c
                    sa = 0.0
                    for j in range(ph):
                        sy = by + offy[j]
                        if sy < 0:
                            sy = 0
                        elif sy > h - 1:
                            sy = h - 1
                        for i in range(pw):
                            sx = bx + offx[i]
                            if sx < 0:
                                sx = 0
                            elif sx > w - 1:
                                sx = w - 1
                            sa += fr[sy, sx]
                    mean_a = sa / npx
                    cov = 0.0
                    va = 0.0
                    for j in range(ph):
                        sy = by + offy[j]
                        if sy < 0:
                            sy = 0
                        elif sy > h - 1:
                            sy = h - 1
                        for i in range(pw):
                            sx = bx + offx[i]
                            if sx < 0:
                                sx = 0
                            elif sx > w - 1:
                                sx = w - 1
                            av = fr[sy, sx] - mean_a
                            bv = b[j, i] - mean_b
                            cov += av * bv
                            va += av * av
                    denom = sqrt(va * vb)
                    if denom > 0.0:
                        rr = cov / denom
                        if rr > 1.0:
                            rr = 1.0
                        elif rr < -1.0:
                            rr = -1.0
                    else:
                        rr = 0.0
                    out[m, r, c] = 0.5 * (rr + 1.0)
    return out_arr
