"""Global 768-d semantic descriptors: flat embedding files plus a stub.

The heavy vision backbone never runs inside this package. Descriptors
arrive either from an SPCE file written by an external exporter, or from
`stub`, a deterministic hash-seeded generator good enough for training
dynamics tests. Both honor the same contract: 768 finite float32 values
per content id.

SPCE layout (little-endian):
    magic   4 bytes  b"SPCE"
    version u32
    count   u64
    dim     u32      must be 768
    records: count * (32-byte content id + dim float32)
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Dict, Iterable, Tuple, Union

import numpy as np

from .errors import FormatError, MissingEmbeddingError
from .rng import stream_from_bytes

MAGIC = b"SPCE"
VERSION = 1
DIM = 768
ID_LEN = 32

_HEADER = struct.Struct("<4sIQI")


def stub(content_id: bytes) -> np.ndarray:
    """Deterministic unit-norm descriptor derived from the content id."""
    g = stream_from_bytes(bytes(content_id), "stub-embedding")
    v = g.standard_normal(DIM)
    v /= np.linalg.norm(v)
    return v.astype(np.float32)


def write_embeddings(path: Union[str, Path], records: Iterable[Tuple[bytes, np.ndarray]]) -> int:
    """Write (content-id, vector) pairs to an SPCE file; returns the count."""
    items = []
    seen = set()
    for cid, vec in records:
        cid = bytes(cid)
        if len(cid) != ID_LEN:
            raise FormatError(f"content id must be {ID_LEN} bytes, got {len(cid)}")
        if cid in seen:
            raise FormatError(f"duplicate content id {cid.hex()}")
        seen.add(cid)
        vec = np.ascontiguousarray(vec, dtype=np.float32)
        if vec.shape != (DIM,):
            raise FormatError(f"embedding must have shape ({DIM},), got {vec.shape}")
        if not np.all(np.isfinite(vec)):
            raise FormatError(f"non-finite embedding for id {cid.hex()}")
        items.append((cid, vec))
    path = Path(path)
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, VERSION, len(items), DIM))
        for cid, vec in items:
            f.write(cid)
            f.write(vec.tobytes())
    return len(items)


class EmbeddingFile:
    """Read-only view of an SPCE file; safe to share across threads."""

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        raw = self.path.read_bytes()
        if len(raw) < _HEADER.size:
            raise FormatError(f"{self.path}: truncated header")
        magic, version, count, dim = _HEADER.unpack_from(raw, 0)
        if magic != MAGIC:
            raise FormatError(f"{self.path}: bad magic {magic!r}")
        if version != VERSION:
            raise FormatError(f"{self.path}: unsupported version {version}")
        if dim != DIM:
            raise FormatError(f"{self.path}: dim {dim} != {DIM}")
        rec = ID_LEN + 4 * DIM
        expected = _HEADER.size + count * rec
        if len(raw) != expected:
            raise FormatError(f"{self.path}: file length {len(raw)} != expected {expected}")
        self._table: Dict[bytes, np.ndarray] = {}
        off = _HEADER.size
        for _ in range(count):
            cid = raw[off:off + ID_LEN]
            if cid in self._table:
                raise FormatError(f"{self.path}: duplicate content id {cid.hex()}")
            vec = np.frombuffer(raw, dtype="<f4", count=DIM, offset=off + ID_LEN)
            self._table[cid] = vec
            off += rec

    def __len__(self) -> int:
        return len(self._table)

    def __contains__(self, content_id: bytes) -> bool:
        return bytes(content_id) in self._table

    def lookup(self, content_id: bytes) -> np.ndarray:
        try:
            return self._table[bytes(content_id)]
        except KeyError:
            raise MissingEmbeddingError(
                f"no embedding for id {bytes(content_id).hex()} in {self.path}"
            ) from None

    def ids(self):
        return self._table.keys()


class SemanticProvider:
    """Resolve content ids to descriptors, optionally falling back to stub.

    source=None means stub-only; otherwise lookups hit the file first and
    either raise or fall back depending on ``fallback_to_stub``.
    """

    def __init__(self, source: EmbeddingFile | None = None, fallback_to_stub: bool = False):
        self.source = source
        self.fallback_to_stub = fallback_to_stub

    def get(self, content_id: bytes) -> np.ndarray:
        if self.source is None:
            return stub(content_id)
        try:
            return self.source.lookup(content_id)
        except MissingEmbeddingError:
            if self.fallback_to_stub:
                return stub(content_id)
            raise
