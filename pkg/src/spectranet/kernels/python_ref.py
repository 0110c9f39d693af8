"""Pure-numpy reference implementation of the pixel kernels.

These are the fallback twins of the compiled kernels in ``_native``. Both
implementations follow the exact same arithmetic: float64 intermediates,
identical accumulation order, half-up rounding to uint8. Forward results
are bit-identical across backends; see the backend notes in
``kernels/__init__.py``.
"""

from __future__ import annotations

import math

import numpy as np


def gauss_taps(sigma: float) -> np.ndarray:
    """Normalized 1-D Gaussian taps truncated at radius ceil(3*sigma)."""
    r = int(math.ceil(3.0 * sigma))
    t = np.arange(-r, r + 1, dtype=np.float64)
    w = np.exp(-(t * t) / (2.0 * sigma * sigma))
    return w / w.sum()


def _axis_coords(n_out: int, n_in: int):
    # Center-aligned source coordinates with edge clamping. Normative
    # form: s = (i+0.5)*scale - 0.5 with scale = in/out precomputed once;
    # other associations differ by an ulp and flip half-up rounding at
    # exact .5 boundaries, so any re-implementation must match this.
    scale = n_in / n_out
    s = (np.arange(n_out, dtype=np.float64) + 0.5) * scale - 0.5
    i0f = np.floor(s)
    f = s - i0f
    i0 = np.clip(i0f, 0, n_in - 1).astype(np.intp)
    i1 = np.clip(i0f + 1.0, 0, n_in - 1).astype(np.intp)
    return i0, i1, f


def resize_bilinear_u8(src: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    h, w = src.shape[0], src.shape[1]
    y0, y1, fy = _axis_coords(out_h, h)
    x0, x1, fx = _axis_coords(out_w, w)
    s64 = src.astype(np.float64)
    p00 = s64[y0[:, None], x0[None, :]]
    p01 = s64[y0[:, None], x1[None, :]]
    p10 = s64[y1[:, None], x0[None, :]]
    p11 = s64[y1[:, None], x1[None, :]]
    gx = fx[None, :, None]
    gy = fy[:, None, None]
    w00 = (1.0 - gx) * (1.0 - gy)
    w01 = gx * (1.0 - gy)
    w10 = (1.0 - gx) * gy
    w11 = gx * gy
    v = p00 * w00 + p01 * w01 + p10 * w10 + p11 * w11
    return np.clip(np.floor(v + 0.5), 0.0, 255.0).astype(np.uint8)


def gaussian_blur_u8(src: np.ndarray, taps: np.ndarray) -> np.ndarray:
    r = (taps.shape[0] - 1) // 2
    h, w = src.shape[0], src.shape[1]
    xi = np.clip(np.arange(-r, w + r), 0, w - 1)
    yi = np.clip(np.arange(-r, h + r), 0, h - 1)
    ext = src[:, xi, :].astype(np.float64)
    hbuf = np.zeros((h, w, 3), np.float64)
    for t in range(2 * r + 1):
        hbuf += ext[:, t : t + w, :] * taps[t]
    vext = hbuf[yi, :, :]
    acc = np.zeros((h, w, 3), np.float64)
    for t in range(2 * r + 1):
        acc += vext[t : t + h, :, :] * taps[t]
    return np.clip(np.floor(acc + 0.5), 0.0, 255.0).astype(np.uint8)


def depthwise_conv2d(x: np.ndarray, k: np.ndarray) -> np.ndarray:
    b, h, w = x.shape
    kh, kw = k.shape
    r = kh // 2
    pad = np.zeros((b, h + 2 * r, w + 2 * r), np.float64)
    pad[:, r : r + h, r : r + w] = x
    kd = k.astype(np.float64)
    acc = np.zeros((b, h, w), np.float64)
    for ky in range(kh):
        for kx in range(kw):
            acc += kd[ky, kx] * pad[:, ky : ky + h, kx : kx + w]
    return acc.astype(np.float32)


def depthwise_conv2d_backward(x: np.ndarray, k: np.ndarray, dout: np.ndarray):
    b, h, w = x.shape
    kh, kw = k.shape
    r = kh // 2
    kd = k.astype(np.float64)

    pg = np.zeros((b, h + 2 * r, w + 2 * r), np.float64)
    pg[:, r : r + h, r : r + w] = dout
    dx = np.zeros((b, h, w), np.float64)
    for u in range(kh):
        for v in range(kw):
            dx += kd[u, v] * pg[:, 2 * r - u : 2 * r - u + h, 2 * r - v : 2 * r - v + w]

    px = np.zeros((b, h + 2 * r, w + 2 * r), np.float64)
    px[:, r : r + h, r : r + w] = x
    g64 = dout.astype(np.float64)
    dk = np.empty((kh, kw), np.float64)
    for u in range(kh):
        for v in range(kw):
            dk[u, v] = np.sum(px[:, u : u + h, v : v + w] * g64)
    return dx.astype(np.float32), dk.astype(np.float32)
