"""Detector-compatible image preprocessing.

The detector consumes 448x448 images normalized with the standard
ImageNet statistics. Embeddings are only valid if the exporter sees the
exact same pixels, so this module reproduces the detector's resize and
normalization byte for byte (the golden vectors shipped with the
detector pin the contract):

  * bilinear resize, center-aligned: s = (i+0.5)*scale - 0.5 with
    scale = in/out computed once per axis (the association matters; other
    forms land an ulp away and flip rounding at exact .5 fractions)
  * float64 interpolation arithmetic, weights applied as
    p00*w00 + p01*w01 + p10*w10 + p11*w11, half-up rounding to uint8
  * normalization X = (I/255 - mean)/std in float32, channel-planar
"""

from __future__ import annotations

from pathlib import Path
from typing import Union

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DataError

SIDE = 448
NORM_MEAN = np.array([0.485, 0.456, 0.406], dtype=np.float32)
NORM_STD = np.array([0.229, 0.224, 0.225], dtype=np.float32)


def decode_image(path: Union[str, Path]) -> np.ndarray:
    """Decode to uint8 HxWx3 RGB; alpha and palettes are flattened."""
    try:
        with Image.open(path) as im:
            return np.ascontiguousarray(im.convert("RGB"))
    except (UnidentifiedImageError, OSError, ValueError) as e:
        raise DataError(f"cannot decode {path}: {e}") from None


def _check_rgb(img: np.ndarray) -> None:
    if not isinstance(img, np.ndarray) or img.dtype != np.uint8:
        raise DataError("expected a uint8 RGB array")
    if img.ndim != 3 or img.shape[2] != 3:
        raise DataError(f"expected HxWx3 RGB, got shape {getattr(img, 'shape', None)}")
    if img.shape[0] == 0 or img.shape[1] == 0:
        raise DataError(f"image has a zero dimension: {img.shape}")


def _axis(n_out: int, n_in: int):
    scale = n_in / n_out
    s = (np.arange(n_out, dtype=np.float64) + 0.5) * scale - 0.5
    i0f = np.floor(s)
    f = s - i0f
    i0 = np.clip(i0f, 0, n_in - 1).astype(np.intp)
    i1 = np.clip(i0f + 1.0, 0, n_in - 1).astype(np.intp)
    return i0, i1, f


def resize_to_canonical(img: np.ndarray) -> np.ndarray:
    """Resize any RGB image to 448x448 exactly as the detector does."""
    _check_rgb(img)
    h, w = img.shape[0], img.shape[1]
    if h == SIDE and w == SIDE:
        return img.copy()
    y0, y1, fy = _axis(SIDE, h)
    x0, x1, fx = _axis(SIDE, w)
    s64 = img.astype(np.float64)
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


def normalize(img: np.ndarray) -> np.ndarray:
    """uint8 448x448 RGB -> float32 channel-planar [3,448,448]."""
    _check_rgb(img)
    if img.shape[0] != SIDE or img.shape[1] != SIDE:
        raise DataError(f"normalize expects {SIDE}x{SIDE}, got {img.shape[:2]}")
    x = img.astype(np.float32) / np.float32(255.0)
    x = (x - NORM_MEAN) / NORM_STD
    return np.ascontiguousarray(x.transpose(2, 0, 1))


def preprocess(path: Union[str, Path]) -> np.ndarray:
    """Decode, resize, normalize: the full detector-compatible pipeline."""
    return normalize(resize_to_canonical(decode_image(path)))
