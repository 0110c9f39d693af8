"""Pixel kernels with a compiled core and a pure-numpy fallback.

The hot per-pixel loops (bilinear resize, separable Gaussian blur, depthwise
convolution and its backward) live in a Cython extension; a numpy fallback
with identical arithmetic is selected at import time when the extension is
unavailable. Set ``SPECTRANET_KERNELS=python`` (or ``native``) to force a
backend. Forward kernels and the input gradient are bit-identical across
backends; the kernel-weight gradient may differ in the last ulp because the
fallback sums pairwise while the compiled loop sums sequentially — each
backend is individually deterministic.

Matrix products and FFTs are intentionally not reimplemented here: BLAS and
pocketfft already are the compiled fast path for those.
"""

from __future__ import annotations

import os

import numpy as np

from ..errors import ConfigError, ShapeError
from . import python_ref
from .python_ref import gauss_taps

_choice = os.environ.get("SPECTRANET_KERNELS", "auto")
if _choice not in ("auto", "native", "python"):
    raise ConfigError(f"SPECTRANET_KERNELS must be auto|native|python, got {_choice!r}")

if _choice == "python":
    _impl = python_ref
    BACKEND = "python"
else:
    try:
        from . import _native as _impl  # type: ignore[no-redef]

        BACKEND = "native"
    except ImportError:
        if _choice == "native":
            raise
        _impl = python_ref
        BACKEND = "python"


def _check_rgb_u8(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img)
    if img.dtype != np.uint8 or img.ndim != 3 or img.shape[2] != 3:
        raise ShapeError(f"expected uint8 HxWx3 image, got {img.dtype} {img.shape}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise ShapeError(f"image has a zero dimension: {img.shape}")
    return np.ascontiguousarray(img)


def resize_bilinear_u8(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize with center-aligned sampling and edge clamping."""
    img = _check_rgb_u8(img)
    if out_h < 1 or out_w < 1:
        raise ShapeError(f"invalid output size {out_h}x{out_w}")
    return _impl.resize_bilinear_u8(img, out_h, out_w)


def gaussian_blur_u8(img: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur, taps truncated at ceil(3*sigma), edge clamp."""
    img = _check_rgb_u8(img)
    if sigma < 0:
        raise ConfigError(f"blur sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return img.copy()
    return _impl.gaussian_blur_u8(img, gauss_taps(sigma))


def depthwise_conv2d(x: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Single-channel 2-D convolution over a batch, zero-padded to same size."""
    x, k = _check_conv_args(x, k)
    return _impl.depthwise_conv2d(x, k)


def depthwise_conv2d_backward(x: np.ndarray, k: np.ndarray, dout: np.ndarray):
    """Gradients of :func:`depthwise_conv2d` wrt its input and kernel."""
    x, k = _check_conv_args(x, k)
    dout = np.ascontiguousarray(dout, dtype=np.float32)
    if dout.shape != x.shape:
        raise ShapeError(f"dout shape {dout.shape} != input shape {x.shape}")
    return _impl.depthwise_conv2d_backward(x, k, dout)


def _check_conv_args(x: np.ndarray, k: np.ndarray):
    x = np.ascontiguousarray(x, dtype=np.float32)
    k = np.ascontiguousarray(k, dtype=np.float32)
    if x.ndim != 3:
        raise ShapeError(f"expected batched BxHxW input, got shape {x.shape}")
    if k.ndim != 2 or k.shape[0] != k.shape[1]:
        raise ShapeError(f"expected square kernel, got shape {k.shape}")
    if k.shape[0] % 2 == 0:
        raise ConfigError(f"kernel size must be odd, got {k.shape[0]}")
    return x, k
