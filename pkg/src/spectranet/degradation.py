"""Transmission-damage simulation: Gaussian blur plus JPEG re-encoding.

Five canonical severity levels, from untouched to heavily degraded.
Blur runs first, then compression (capture-then-upload order). Every op
preserves image dimensions and is deterministic for fixed inputs on a
fixed platform; JPEG bytes are whatever the linked libjpeg produces, the
contract is on decoded pixels only.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from PIL import Image

from . import kernels
from .errors import ConfigError
from .preprocessing import _check_rgb


@dataclass(frozen=True)
class DegradationLevel:
    sigma: float   # Gaussian blur radius
    quality: int   # JPEG quality factor

    def __post_init__(self):
        if self.sigma < 0:
            raise ConfigError(f"blur sigma must be >= 0, got {self.sigma}")
        if not 1 <= self.quality <= 100:
            raise ConfigError(f"JPEG quality must be in 1..100, got {self.quality}")


LEVELS: Tuple[DegradationLevel, ...] = (
    DegradationLevel(0.0, 100),
    DegradationLevel(0.5, 90),
    DegradationLevel(1.5, 75),
    DegradationLevel(2.5, 50),
    DegradationLevel(4.0, 30),
)


def gaussian_blur(img: np.ndarray, sigma: float) -> np.ndarray:
    """Separable blur, kernel radius ceil(3*sigma), edge-clamped, sum-1 taps."""
    _check_rgb(img)
    if sigma < 0:
        raise ConfigError(f"blur sigma must be >= 0, got {sigma}")
    return kernels.gaussian_blur_u8(img, sigma)


def jpeg_reencode(img: np.ndarray, quality: int) -> np.ndarray:
    """Encode to baseline JPEG at the given quality and decode back.

    Chroma subsampling is 4:2:0 below quality 90 and 4:4:4 at or above,
    mirroring common encoder defaults. Output dimensions always equal
    input dimensions.
    """
    _check_rgb(img)
    quality = int(quality)
    if not 1 <= quality <= 100:
        raise ConfigError(f"JPEG quality must be in 1..100, got {quality}")
    buf = io.BytesIO()
    Image.fromarray(img, "RGB").save(
        buf, format="JPEG", quality=quality,
        subsampling=2 if quality < 90 else 0,  # 2 = 4:2:0, 0 = 4:4:4
    )
    buf.seek(0)
    out = np.asarray(Image.open(buf).convert("RGB"))
    return np.ascontiguousarray(out)


def apply_level(img: np.ndarray, level: DegradationLevel) -> np.ndarray:
    """Blur then re-encode. The no-degradation level is an exact identity
    (short-circuited; a real Q=100 round-trip would still cost ~2 LSB)."""
    _check_rgb(img)
    if level.sigma == 0.0 and level.quality == 100:
        return img.copy()
    return jpeg_reencode(gaussian_blur(img, level.sigma), level.quality)
