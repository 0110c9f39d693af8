"""Image preprocessing and hand-crafted view extraction.

Turns a decoded RGB image into the model's three non-semantic views:
a 9-float frequency summary, an 8-float moment summary, and a 2401x243
patch matrix. All paths are deterministic: identical input bytes give
identical output bytes regardless of platform (float64 accumulation,
fixed traversal order, no threading).
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .errors import FormatError, NumericError, ShapeError

SIDE = 448
PATCH = 9
GRID = SIDE // PATCH            # 49; pixels 441..447 fall outside the grid
N_PATCHES = GRID * GRID         # 2401
PATCH_DIM = 3 * PATCH * PATCH   # 243

NORM_MEAN = np.array([0.485, 0.456, 0.406], dtype=np.float32)
NORM_STD = np.array([0.229, 0.224, 0.225], dtype=np.float32)

STAT_EPS = 1e-8  # below this global std the image is treated as constant


def _check_rgb(img: np.ndarray) -> None:
    if not isinstance(img, np.ndarray) or img.dtype != np.uint8:
        raise FormatError("expected a uint8 RGB array")
    if img.ndim != 3 or img.shape[2] != 3:
        raise FormatError(f"expected HxWx3 RGB, got shape {getattr(img, 'shape', None)}")
    if img.shape[0] == 0 or img.shape[1] == 0:
        raise FormatError(f"image has a zero dimension: {img.shape}")


def resize_bilinear(img: np.ndarray) -> np.ndarray:
    """Resize any RGB image to 448x448 (bilinear, edge clamped, half-up)."""
    _check_rgb(img)
    if img.shape[0] == SIDE and img.shape[1] == SIDE:
        return img.copy()
    return kernels.resize_bilinear_u8(img, SIDE, SIDE)


def normalize(img: np.ndarray) -> np.ndarray:
    """Map a 448x448 uint8 image to channel-planar float32 [3,448,448].

    X = (I/255 - mean) / std per channel, float32 arithmetic throughout.
    """
    _check_rgb(img)
    if img.shape[0] != SIDE or img.shape[1] != SIDE:
        raise ShapeError(f"normalize expects {SIDE}x{SIDE}, got {img.shape[:2]}")
    x = img.astype(np.float32) / np.float32(255.0)
    x = (x - NORM_MEAN) / NORM_STD
    return np.ascontiguousarray(x.transpose(2, 0, 1))


def fft2d(channel: np.ndarray) -> np.ndarray:
    """Unnormalized forward 2-D DFT of one channel.

    F(u,v) = sum_x sum_y X(x,y) * exp(-j*2*pi*(u*x/H + v*y/W)), no 1/N
    factor. 448 = 64*7 needs a mixed-radix transform; numpy's pocketfft
    provides one, so there is nothing to gain from hand-rolling it.
    """
    ch = np.asarray(channel)
    if ch.ndim != 2:
        raise ShapeError(f"fft2d expects a 2-D channel, got shape {ch.shape}")
    if not np.all(np.isfinite(ch)):
        raise NumericError("fft2d input contains non-finite values")
    return np.fft.fft2(ch)


def _check_planar(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim != 3 or x.shape[0] != 3:
        raise ShapeError(f"expected channel-planar [3,H,W], got shape {x.shape}")
    return x


def fft_features(x: np.ndarray) -> np.ndarray:
    """Nine frequency-domain statistics: [mu_R, sigma_R, eta_R, mu_G, ...].

    Per channel: mean and population std of log(1+|F|) over every bin
    (DC included, no fftshift), plus the RMS deviation of the rescaled
    phase (phi+pi)/(2*pi) from 0.5. eta is bounded by 0.5.
    """
    x = _check_planar(x)
    out = np.empty(9, dtype=np.float32)
    for c in range(3):
        spec = fft2d(x[c])
        logmag = np.log1p(np.abs(spec))
        phase = np.arctan2(spec.imag, spec.real)
        unit = (phase + np.pi) / (2.0 * np.pi)
        out[3 * c] = logmag.mean()
        out[3 * c + 1] = logmag.std()
        out[3 * c + 2] = np.sqrt(np.mean((unit - 0.5) ** 2))
    return out


def stat_features(x: np.ndarray) -> np.ndarray:
    """Eight moment statistics: per-channel mean/std, global skew/kurtosis.

    Layout [mu_R, sd_R, mu_G, sd_G, mu_B, sd_B, gamma, kappa] with
    population stds; kappa is excess kurtosis. A (near-)constant image
    (global std < 1e-8) yields gamma = kappa = 0 rather than dividing by
    zero.
    """
    x = _check_planar(x).astype(np.float64)
    out = np.empty(8, dtype=np.float32)
    for c in range(3):
        out[2 * c] = x[c].mean()
        out[2 * c + 1] = x[c].std()
    mu = x.mean()
    sd = x.std()
    if sd < STAT_EPS:
        out[6] = 0.0
        out[7] = 0.0
    else:
        z = (x - mu) / sd
        out[6] = np.mean(z ** 3)
        out[7] = np.mean(z ** 4) - 3.0
    return out


def unfold_patches(x: np.ndarray) -> np.ndarray:
    """Cut [3,448,448] into the 2401x243 patch matrix.

    Grid positions are 0,9,...,432 on both axes (441x441 covered; the
    last 7 pixels per axis are dropped). Row i holds grid cell
    (i div 49, i mod 49); within a row the layout is channel, then patch
    row, then patch column.
    """
    x = _check_planar(x)
    if x.shape[1] != SIDE or x.shape[2] != SIDE:
        raise ShapeError(f"unfold expects [3,{SIDE},{SIDE}], got {x.shape}")
    span = GRID * PATCH
    v = x[:, :span, :span].reshape(3, GRID, PATCH, GRID, PATCH)
    v = v.transpose(1, 3, 0, 2, 4)
    return np.ascontiguousarray(v.reshape(N_PATCHES, PATCH_DIM), dtype=np.float32)


def fold_patches(p: np.ndarray) -> np.ndarray:
    """Inverse of unfold_patches onto the covered [3,441,441] region."""
    p = np.asarray(p)
    if p.shape != (N_PATCHES, PATCH_DIM):
        raise ShapeError(f"expected ({N_PATCHES},{PATCH_DIM}), got {p.shape}")
    v = p.reshape(GRID, GRID, 3, PATCH, PATCH).transpose(2, 0, 3, 1, 4)
    span = GRID * PATCH
    return np.ascontiguousarray(v.reshape(3, span, span))
