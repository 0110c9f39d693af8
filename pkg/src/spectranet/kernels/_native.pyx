# Compiled twins of kernels/python_ref.py. Arithmetic mirrors the numpy
# fallback exactly (float64 intermediates, same accumulation order, half-up
# rounding), so forward outputs are bit-identical across backends. Compiled
# with -ffp-contract=off to keep that guarantee.

import numpy as np

cimport numpy as cnp
from libc.math cimport floor

cnp.import_array()


def resize_bilinear_u8(src, int out_h, int out_w):
    cdef const unsigned char[:, :, ::1] s = np.ascontiguousarray(src)
    cdef Py_ssize_t h = s.shape[0], w = s.shape[1]
    cdef cnp.ndarray out_arr = np.empty((out_h, out_w, 3), dtype=np.uint8)
    cdef unsigned char[:, :, ::1] out = out_arr

    cdef cnp.ndarray y0a = np.empty(out_h, dtype=np.intp)
    cdef cnp.ndarray y1a = np.empty(out_h, dtype=np.intp)
    cdef cnp.ndarray fya = np.empty(out_h, dtype=np.float64)
    cdef cnp.ndarray x0a = np.empty(out_w, dtype=np.intp)
    cdef cnp.ndarray x1a = np.empty(out_w, dtype=np.intp)
    cdef cnp.ndarray fxa = np.empty(out_w, dtype=np.float64)
    cdef Py_ssize_t[::1] y0 = y0a, y1 = y1a, x0 = x0a, x1 = x1a
    cdef double[::1] fy = fya, fx = fxa

    cdef double scale, sc, i0f
    cdef Py_ssize_t i, j, c, lo, hi
    scale = (<double> h) / (<double> out_h)
    for i in range(out_h):
        sc = (i + 0.5) * scale - 0.5
        i0f = floor(sc)
        fy[i] = sc - i0f
        lo = <Py_ssize_t> i0f
        if lo < 0:
            lo = 0
        elif lo > h - 1:
            lo = h - 1
        hi = <Py_ssize_t> i0f + 1
        if hi < 0:
            hi = 0
        elif hi > h - 1:
            hi = h - 1
        y0[i] = lo
        y1[i] = hi
    scale = (<double> w) / (<double> out_w)
    for j in range(out_w):
        sc = (j + 0.5) * scale - 0.5
        i0f = floor(sc)
        fx[j] = sc - i0f
        lo = <Py_ssize_t> i0f
        if lo < 0:
            lo = 0
        elif lo > w - 1:
            lo = w - 1
        hi = <Py_ssize_t> i0f + 1
        if hi < 0:
            hi = 0
        elif hi > w - 1:
            hi = w - 1
        x0[j] = lo
        x1[j] = hi

    cdef double gx, gy, w00, w01, w10, w11, v
    for i in range(out_h):
        gy = fy[i]
        for j in range(out_w):
            gx = fx[j]
            w00 = (1.0 - gx) * (1.0 - gy)
            w01 = gx * (1.0 - gy)
            w10 = (1.0 - gx) * gy
            w11 = gx * gy
            for c in range(3):
                v = (<double> s[y0[i], x0[j], c]) * w00 \
                    + (<double> s[y0[i], x1[j], c]) * w01 \
                    + (<double> s[y1[i], x0[j], c]) * w10 \
                    + (<double> s[y1[i], x1[j], c]) * w11
                v = floor(v + 0.5)
                if v < 0.0:
                    v = 0.0
                elif v > 255.0:
                    v = 255.0
                out[i, j, c] = <unsigned char> v
    return out_arr


def gaussian_blur_u8(src, taps):
    cdef const unsigned char[:, :, ::1] s = np.ascontiguousarray(src)
    cdef const double[::1] tp = np.ascontiguousarray(taps, dtype=np.float64)
    cdef Py_ssize_t h = s.shape[0], w = s.shape[1]
    cdef Py_ssize_t n = tp.shape[0], r = (tp.shape[0] - 1) // 2
    cdef cnp.ndarray hbuf_arr = np.zeros((h, w, 3), dtype=np.float64)
    cdef double[:, :, ::1] hbuf = hbuf_arr
    cdef cnp.ndarray out_arr = np.empty((h, w, 3), dtype=np.uint8)
    cdef unsigned char[:, :, ::1] out = out_arr

    cdef Py_ssize_t i, j, c, t, q
    cdef double acc, v
    for i in range(h):
        for j in range(w):
            for c in range(3):
                acc = 0.0
                for t in range(n):
                    q = j + t - r
                    if q < 0:
                        q = 0
                    elif q > w - 1:
                        q = w - 1
                    acc = acc + (<double> s[i, q, c]) * tp[t]
                hbuf[i, j, c] = acc
    for i in range(h):
        for j in range(w):
            for c in range(3):
                acc = 0.0
                for t in range(n):
                    q = i + t - r
                    if q < 0:
                        q = 0
                    elif q > h - 1:
                        q = h - 1
                    acc = acc + hbuf[q, j, c] * tp[t]
                v = floor(acc + 0.5)
                if v < 0.0:
                    v = 0.0
                elif v > 255.0:
                    v = 255.0
                out[i, j, c] = <unsigned char> v
    return out_arr


def depthwise_conv2d(x, k):
    cdef Py_ssize_t b = x.shape[0], h = x.shape[1], w = x.shape[2]
    cdef Py_ssize_t kh = k.shape[0], kw = k.shape[1], r = k.shape[0] // 2
    pad_arr = np.zeros((b, h + 2 * r, w + 2 * r), dtype=np.float64)
    pad_arr[:, r : r + h, r : r + w] = x
    cdef const double[:, :, ::1] pad = pad_arr
    cdef const double[:, ::1] kd = np.ascontiguousarray(k, dtype=np.float64)
    cdef cnp.ndarray out_arr = np.empty((b, h, w), dtype=np.float32)
    cdef float[:, :, ::1] out = out_arr

    cdef Py_ssize_t bi, i, j, ky, kx
    cdef double acc
    for bi in range(b):
        for i in range(h):
            for j in range(w):
                acc = 0.0
                for ky in range(kh):
                    for kx in range(kw):
                        acc = acc + kd[ky, kx] * pad[bi, i + ky, j + kx]
                out[bi, i, j] = <float> acc
    return out_arr


def depthwise_conv2d_backward(x, k, dout):
    cdef Py_ssize_t b = x.shape[0], h = x.shape[1], w = x.shape[2]
    cdef Py_ssize_t kh = k.shape[0], kw = k.shape[1], r = k.shape[0] // 2
    cdef const double[:, ::1] kd = np.ascontiguousarray(k, dtype=np.float64)

    pg_arr = np.zeros((b, h + 2 * r, w + 2 * r), dtype=np.float64)
    pg_arr[:, r : r + h, r : r + w] = dout
    cdef const double[:, :, ::1] pg = pg_arr
    cdef cnp.ndarray dx_arr = np.empty((b, h, w), dtype=np.float32)
    cdef float[:, :, ::1] dx = dx_arr

    cdef Py_ssize_t bi, i, j, u, v
    cdef double acc
    for bi in range(b):
        for i in range(h):
            for j in range(w):
                acc = 0.0
                for u in range(kh):
                    for v in range(kw):
                        acc = acc + kd[u, v] * pg[bi, 2 * r - u + i, 2 * r - v + j]
                dx[bi, i, j] = <float> acc

    px_arr = np.zeros((b, h + 2 * r, w + 2 * r), dtype=np.float64)
    px_arr[:, r : r + h, r : r + w] = x
    cdef const double[:, :, ::1] px = px_arr
    cdef const float[:, :, ::1] g = np.ascontiguousarray(dout, dtype=np.float32)
    cdef cnp.ndarray dk_arr = np.empty((kh, kw), dtype=np.float32)
    cdef float[:, ::1] dk = dk_arr
    for u in range(kh):
        for v in range(kw):
            acc = 0.0
            for bi in range(b):
                for i in range(h):
                    for j in range(w):
                        acc = acc + px[bi, i + u, j + v] * (<double> g[bi, i, j])
            dk[u, v] = <float> acc
    return dx_arr, dk_arr
