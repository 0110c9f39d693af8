"""Content identity shared with the detector pipeline.

id = sha256(width_u32_le || height_u32_le || decoded RGB bytes), taken on
the pre-resize image, so lossless re-encodes keep their identity and the
detector can match embeddings to its own records.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np

from .errors import DataError


def content_id(img: np.ndarray) -> bytes:
    if not isinstance(img, np.ndarray) or img.dtype != np.uint8 \
            or img.ndim != 3 or img.shape[2] != 3:
        raise DataError("content_id expects a decoded uint8 HxWx3 image")
    h, w = img.shape[:2]
    digest = hashlib.sha256()
    digest.update(struct.pack("<II", w, h))
    digest.update(np.ascontiguousarray(img).tobytes())
    return digest.digest()
