"""SPCE embedding file writer and reader.

Layout (little-endian), fixed by the detector's loader:

    magic   4 bytes  b"SPCE"
    version u32      1
    count   u64
    dim     u32      must be 768
    records: count * (32-byte content id + dim float32)
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Dict, Iterable, Tuple, Union

import numpy as np

from .errors import DataError

MAGIC = b"SPCE"
VERSION = 1
DIM = 768
ID_LEN = 32

_HEADER = struct.Struct("<4sIQI")


def write(path: Union[str, Path], records: Iterable[Tuple[bytes, np.ndarray]]) -> int:
    """Write (content-id, 768-float32) pairs; returns the record count."""
    items = []
    seen = set()
    for cid, vec in records:
        cid = bytes(cid)
        if len(cid) != ID_LEN:
            raise DataError(f"content id must be {ID_LEN} bytes, got {len(cid)}")
        if cid in seen:
            raise DataError(f"duplicate content id {cid.hex()}")
        seen.add(cid)
        vec = np.ascontiguousarray(vec, dtype="<f4")
        if vec.shape != (DIM,):
            raise DataError(
                f"embedding for {cid.hex()[:12]} has shape {vec.shape}, "
                f"the detector requires ({DIM},)"
            )
        if not np.all(np.isfinite(vec)):
            raise DataError(f"non-finite embedding for id {cid.hex()}")
        items.append((cid, vec))
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, VERSION, len(items), DIM))
        for cid, vec in items:
            f.write(cid)
            f.write(vec.tobytes())
    return len(items)


def read(path: Union[str, Path]) -> Dict[bytes, np.ndarray]:
    """Load a whole SPCE file into an id -> vector dict (for round trips)."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise DataError(f"{path}: truncated header")
    magic, version, count, dim = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise DataError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise DataError(f"{path}: unsupported version {version}")
    if dim != DIM:
        raise DataError(f"{path}: dim {dim} != {DIM}")
    rec = ID_LEN + 4 * DIM
    if len(raw) != _HEADER.size + count * rec:
        raise DataError(f"{path}: file length does not match {count} records")
    out: Dict[bytes, np.ndarray] = {}
    off = _HEADER.size
    for _ in range(count):
        cid = raw[off:off + ID_LEN]
        if cid in out:
            raise DataError(f"{path}: duplicate content id {cid.hex()}")
        out[cid] = np.frombuffer(raw, dtype="<f4", count=DIM, offset=off + ID_LEN).copy()
        off += rec
    return out
