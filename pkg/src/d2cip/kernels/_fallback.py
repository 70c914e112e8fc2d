"""Pure-numpy response-map kernels.

Reference implementation of the hot loops; the compiled extension in
``_core.pyx`` mirrors these semantics operation for operation.  Per-cell
noise is derived from an integer hash of (seed, frame, cell) so any two maps
that overlap on the pixel grid see identical scores at the shared cells.
"""

from __future__ import annotations

import numpy as np

# splitmix64 finalizer constants
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_GOLD = np.uint64(0x9E3779B97F4A7C15)
_SEED_TWEAK = np.uint64(0xD1B54A32D192ED03)
_INV_2_53 = float(2.0 ** -53)
_TWO_PI = 2.0 * np.pi


def _fin(z):
    # wrapping uint64 arithmetic is the point here, not an accident
    with np.errstate(over="ignore"):
        z = z ^ (z >> np.uint64(30))
        z = z * _M1
        z = z ^ (z >> np.uint64(27))
        z = z * _M2
        z = z ^ (z >> np.uint64(31))
    return z


def _frame_key(seed: int, frame_index: int) -> np.uint64:
    with np.errstate(over="ignore"):
        h = _fin(np.uint64(np.int64(seed)) ^ _SEED_TWEAK)
        return _fin(h + _GOLD * np.uint64(np.int64(frame_index)))


def cell_noise(seed: int, frame_index: int, xs, ys) -> np.ndarray:
    """Standard-normal noise field addressed by integer pixel coordinate.

    Deterministic in (seed, frame_index, x, y); the same cell always yields
    the same draw no matter which response-map window contains it.
    """
    xs = np.asarray(xs, dtype=np.int64).astype(np.uint64)
    ys = np.asarray(ys, dtype=np.int64).astype(np.uint64)
    h0 = _frame_key(seed, frame_index)
    with np.errstate(over="ignore"):
        h = _fin(h0 + _GOLD * xs)
        h = _fin(h + _GOLD * ys)
        ha = _fin(h + _GOLD)
        hb = _fin(h + _GOLD * np.uint64(2))
    u1 = ((ha >> np.uint64(11)).astype(np.float64) + 1.0) * _INV_2_53  # (0, 1]
    u2 = (hb >> np.uint64(11)).astype(np.float64) * _INV_2_53          # [0, 1)
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(_TWO_PI * u2)


def _gauss_rect(x0, y0, out_w, out_h, peaks_x, peaks_y, amps, widths,
                noise_std, seed, frame_index):
    """Evaluate the peak-sum surface on an axis-aligned integer rectangle."""
    xs = x0 + np.arange(out_w, dtype=np.int64)
    ys = y0 + np.arange(out_h, dtype=np.int64)
    gx = xs[np.newaxis, :].astype(np.float64)
    gy = ys[:, np.newaxis].astype(np.float64)
    acc = np.zeros((out_h, out_w), dtype=np.float64)
    for p in range(len(peaks_x)):
        if amps[p] == 0.0:
            continue
        inv = 1.0 / (2.0 * widths[p] * widths[p])
        dx = gx - peaks_x[p]
        dy = gy - peaks_y[p]
        acc += amps[p] * np.exp(-(dx * dx + dy * dy) * inv)
    if noise_std != 0.0:
        mx, my = np.meshgrid(xs, ys)
        acc += noise_std * cell_noise(seed, frame_index, mx, my)
    return acc


def gauss_response_maps(centers_x, centers_y, peaks_x, peaks_y, amps, widths,
                        noise_std, seed, frame_index, radius):
    """Response maps of a synthetic peak-sum surface, one per center.

    Returns (n, 2R+1, 2R+1) float64 with cell (row, col) of map i at pixel
    (centers_x[i] - R + col, centers_y[i] - R + row); scores are clipped at 0.
    """
    centers_x = np.asarray(centers_x, dtype=np.int64)
    centers_y = np.asarray(centers_y, dtype=np.int64)
    peaks_x = np.asarray(peaks_x, dtype=np.float64)
    peaks_y = np.asarray(peaks_y, dtype=np.float64)
    amps = np.asarray(amps, dtype=np.float64)
    widths = np.asarray(widths, dtype=np.float64)
    n = len(centers_x)
    side = 2 * int(radius) + 1
    out = np.empty((n, side, side), dtype=np.float64)
    for i in range(n):
        rect = _gauss_rect(centers_x[i] - radius, centers_y[i] - radius,
                           side, side, peaks_x, peaks_y, amps, widths,
                           noise_std, seed, frame_index)
        out[i] = np.maximum(rect, 0.0)
    return out


def render_intensity(width, height, peaks_x, peaks_y, amps, widths,
                     noise_std, seed, frame_index):
    """Grayscale frame of the same surface, clipped into [0, 1]."""
    rect = _gauss_rect(0, 0, int(width), int(height),
                       np.asarray(peaks_x, dtype=np.float64),
                       np.asarray(peaks_y, dtype=np.float64),
                       np.asarray(amps, dtype=np.float64),
                       np.asarray(widths, dtype=np.float64),
                       noise_std, seed, frame_index)
    return np.clip(rect, 0.0, 1.0)


def patch_offsets(size: float, n_samples: int) -> np.ndarray:
    """Integer sample offsets for nearest-neighbor rescale of a patch axis."""
    k = np.arange(n_samples, dtype=np.float64)
    pos = -size * 0.5 + (k + 0.5) * size / n_samples
    return np.floor(pos + 0.5).astype(np.int64)


def extract_patch(frame, cx, cy, size_w, size_h, out_w, out_h):
    """Nearest-neighbor sample a (out_h, out_w) patch centered at (cx, cy).

    Out-of-frame samples are edge-clamped.
    """
    frame = np.asarray(frame, dtype=np.float64)
    h, w = frame.shape
    ox = np.clip(int(cx) + patch_offsets(size_w, out_w), 0, w - 1)
    oy = np.clip(int(cy) + patch_offsets(size_h, out_h), 0, h - 1)
    return frame[np.ix_(oy, ox)]


def ncc_response_maps(frame, patch, centers_x, centers_y, radius, size_w, size_h):
    """Normalized-cross-correlation response maps, one per center.

    Each grid cell scores the NCC between ``patch`` and the frame patch of
    size (size_w, size_h) centered at that cell (nearest-neighbor rescaled to
    the patch resolution), mapped from [-1, 1] into [0, 1] via (r + 1) / 2.
    """
    frame = np.asarray(frame, dtype=np.float64)
    patch = np.asarray(patch, dtype=np.float64)
    centers_x = np.asarray(centers_x, dtype=np.int64)
    centers_y = np.asarray(centers_y, dtype=np.int64)
    h, w = frame.shape
    ph, pw = patch.shape
    npx = ph * pw
    side = 2 * int(radius) + 1

    offx = patch_offsets(size_w, pw)
    offy = patch_offsets(size_h, ph)
    b = patch
    mean_b = b.sum() / npx
    b0 = b - mean_b
    vb = float((b0 * b0).sum())

    cols = np.arange(side, dtype=np.int64) - radius
    out = np.empty((len(centers_x), side, side), dtype=np.float64)
    for i in range(len(centers_x)):
        # sample indices for every cell of this map: (side, len(off))
        sx = np.clip((centers_x[i] + cols)[:, None] + offx[None, :], 0, w - 1)
        sy = np.clip((centers_y[i] + cols)[:, None] + offy[None, :], 0, h - 1)
        # gather (side, side, ph, pw) then reduce per cell
        a = frame[sy[:, None, :, None], sx[None, :, None, :]]
        mean_a = a.sum(axis=(2, 3)) / npx
        a0 = a - mean_a[:, :, None, None]
        cov = np.einsum("rcij,ij->rc", a0, b0)
        va = np.einsum("rcij,rcij->rc", a0, a0)
        denom = np.sqrt(va * vb)
        with np.errstate(invalid="ignore", divide="ignore"):
            r = np.where(denom > 0.0, cov / denom, 0.0)
        out[i] = 0.5 * (np.clip(r, -1.0, 1.0) + 1.0)
    return out
