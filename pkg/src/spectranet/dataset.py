"""Image decoding, content identity, manifests, and the SPDS record format.

A dataset file holds one fixed-size record per image so readers can seek
by index. All integers little-endian.

SPDS layout:
    magic   4 bytes  b"SPDS"
    version u32
    count   u64
    flags   u32      bit 0: patch matrices stored inline
    records: 32-byte content id + 1-byte label + 768 + 9 + 8 float32,
             then 2401*243 float32 when patches are inline
             (3173 bytes per record without patches)

The content id is sha256(width_u32_le || height_u32_le || RGB bytes) of
the DECODED, pre-resize image, so the same pixels re-encoded losslessly
keep their identity. Any other tool producing ids for this pipeline must
use the same rule.
"""

from __future__ import annotations

import hashlib
import logging
import mmap
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from PIL import Image, UnidentifiedImageError

from . import preprocessing as pp
from .errors import ConfigError, FormatError, ShapeError
from .semantic import SemanticProvider
from .training import InMemoryViews

log = logging.getLogger(__name__)

MAGIC = b"SPDS"
VERSION = 1
FLAG_PATCHES = 1

_HEADER = struct.Struct("<4sIQI")
ID_LEN = 32
_BASE_VIEW_FLOATS = 768 + 9 + 8
_PATCH_FLOATS = pp.N_PATCHES * pp.PATCH_DIM


def decode_image(path: Union[str, Path]) -> np.ndarray:
    """Decode PNG/JPEG to uint8 HxWx3 RGB (alpha and palettes flattened)."""
    try:
        with Image.open(path) as im:
            return np.ascontiguousarray(im.convert("RGB"))
    except (UnidentifiedImageError, OSError, ValueError) as e:
        raise FormatError(f"cannot decode {path}: {e}") from None


def content_id(img: np.ndarray) -> bytes:
    """sha256 over (width, height, raw RGB bytes) of a decoded image."""
    pp._check_rgb(img)
    h, w = img.shape[:2]
    digest = hashlib.sha256()
    digest.update(struct.pack("<II", w, h))
    digest.update(np.ascontiguousarray(img).tobytes())
    return digest.digest()


@dataclass(frozen=True)
class ManifestRow:
    path: str
    label: int
    split: str


SPLITS = ("train", "val", "test")


def read_manifest(path: Union[str, Path]) -> List[ManifestRow]:
    """Parse a path,label,split CSV; a literal header row is skipped."""
    import csv

    rows: List[ManifestRow] = []
    with open(path, newline="") as f:
        for ln, rec in enumerate(csv.reader(f), start=1):
            if not rec or (ln == 1 and rec == ["path", "label", "split"]):
                continue
            if len(rec) != 3:
                raise FormatError(f"{path}:{ln}: expected path,label,split")
            p, label_s, split = (c.strip() for c in rec)
            if label_s not in ("0", "1"):
                raise FormatError(f"{path}:{ln}: label must be 0 or 1, got {label_s!r}")
            if split not in SPLITS:
                raise FormatError(f"{path}:{ln}: split must be one of {SPLITS}, got {split!r}")
            rows.append(ManifestRow(p, int(label_s), split))
    return rows


def write_manifest(path: Union[str, Path], rows: Sequence[ManifestRow]) -> None:
    import csv

    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["path", "label", "split"])
        for r in rows:
            w.writerow([r.path, r.label, r.split])


@dataclass
class MultiViewRecord:
    content_id: bytes
    label: int
    semantic: np.ndarray            # [768] f32
    fft: np.ndarray                 # [9] f32
    stat: np.ndarray                # [8] f32
    patches: Optional[np.ndarray]   # [2401,243] f32 or None


def extract_views(img: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(fft, stat, patches) for one decoded image."""
    x = pp.normalize(pp.resize_bilinear(img))
    return pp.fft_features(x), pp.stat_features(x), pp.unfold_patches(x)


def extract_record(path: Union[str, Path], label: int,
                   provider: SemanticProvider) -> MultiViewRecord:
    img = decode_image(path)
    cid = content_id(img)
    fft, stat, patches = extract_views(img)
    return MultiViewRecord(
        content_id=cid, label=int(label),
        semantic=np.ascontiguousarray(provider.get(cid), np.float32),
        fft=fft, stat=stat, patches=patches,
    )


class DatasetWriter:
    """Sequential SPDS writer; the record count is back-patched on close."""

    def __init__(self, path: Union[str, Path], patches_inline: bool = True):
        self.path = Path(path)
        self.patches_inline = patches_inline
        self._f = open(self.path, "w+b")
        self._count = 0
        flags = FLAG_PATCHES if patches_inline else 0
        self._f.write(_HEADER.pack(MAGIC, VERSION, 0, flags))

    def append(self, rec: MultiViewRecord) -> None:
        if rec.label not in (0, 1):
            raise FormatError(f"label must be 0 or 1, got {rec.label}")
        if len(rec.content_id) != ID_LEN:
            raise FormatError(f"content id must be {ID_LEN} bytes")
        views = [
            np.ascontiguousarray(rec.semantic, "<f4").reshape(768),
            np.ascontiguousarray(rec.fft, "<f4").reshape(9),
            np.ascontiguousarray(rec.stat, "<f4").reshape(8),
        ]
        if self.patches_inline:
            if rec.patches is None:
                raise FormatError("writer expects inline patches but record has none")
            views.append(np.ascontiguousarray(rec.patches, "<f4").reshape(_PATCH_FLOATS))
        self._f.write(rec.content_id)
        self._f.write(struct.pack("<B", rec.label))
        for v in views:
            self._f.write(v.tobytes())
        self._count += 1

    def close(self) -> int:
        flags = FLAG_PATCHES if self.patches_inline else 0
        self._f.seek(0)
        self._f.write(_HEADER.pack(MAGIC, VERSION, self._count, flags))
        self._f.close()
        return self._count

    def __enter__(self) -> "DatasetWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


class DatasetReader:
    """Random-access SPDS reader backed by a shared mmap."""

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        self._file = open(self.path, "rb")
        try:
            self._mm = mmap.mmap(self._file.fileno(), 0, access=mmap.ACCESS_READ)
        except ValueError:
            self._file.close()
            raise FormatError(f"{self.path}: empty or unmappable file") from None
        if len(self._mm) < _HEADER.size:
            raise FormatError(f"{self.path}: truncated header")
        magic, version, count, flags = _HEADER.unpack_from(self._mm, 0)
        if magic != MAGIC:
            raise FormatError(f"{self.path}: bad magic {magic!r}")
        if version != VERSION:
            raise FormatError(f"{self.path}: unsupported version {version}")
        self.count = count
        self.patches_inline = bool(flags & FLAG_PATCHES)
        n_floats = _BASE_VIEW_FLOATS + (_PATCH_FLOATS if self.patches_inline else 0)
        self.record_size = ID_LEN + 1 + 4 * n_floats
        expected = _HEADER.size + count * self.record_size
        if len(self._mm) != expected:
            raise FormatError(
                f"{self.path}: length {len(self._mm)} != {expected} for {count} records"
            )

    def __len__(self) -> int:
        return self.count

    def read_record(self, index: int) -> MultiViewRecord:
        if not 0 <= index < self.count:
            raise IndexError(f"record {index} out of range [0, {self.count})")
        off = _HEADER.size + index * self.record_size
        cid = bytes(self._mm[off:off + ID_LEN])
        label = self._mm[off + ID_LEN]
        base = off + ID_LEN + 1

        def block(n: int, skip: int) -> np.ndarray:
            a = np.frombuffer(self._mm, dtype="<f4", count=n, offset=base + 4 * skip)
            return a.copy()

        semantic = block(768, 0)
        fft = block(9, 768)
        stat = block(8, 768 + 9)
        patches = None
        if self.patches_inline:
            patches = block(_PATCH_FLOATS, _BASE_VIEW_FLOATS).reshape(pp.N_PATCHES, pp.PATCH_DIM)
        return MultiViewRecord(cid, int(label), semantic, fft, stat, patches)

    def __iter__(self) -> Iterator[MultiViewRecord]:
        for i in range(self.count):
            yield self.read_record(i)

    def labels(self) -> np.ndarray:
        out = np.empty(self.count, dtype=np.int64)
        for i in range(self.count):
            out[i] = self._mm[_HEADER.size + i * self.record_size + ID_LEN]
        return out

    def close(self) -> None:
        self._mm.close()
        self._file.close()

    def __enter__(self) -> "DatasetReader":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def extract(manifest: Sequence[ManifestRow], provider: SemanticProvider,
            out_path: Union[str, Path], patches_inline: bool = True,
            skip_undecodable: bool = False) -> int:
    """Extract every manifest row into an SPDS file, preserving order.

    Returns the number of records written. Undecodable images abort the
    run unless skip_undecodable is set, in which case they are logged and
    dropped.
    """
    with DatasetWriter(out_path, patches_inline=patches_inline) as w:
        for row in manifest:
            try:
                rec = extract_record(row.path, row.label, provider)
            except FormatError as e:
                if skip_undecodable:
                    log.warning("skipping %s: %s", row.path, e)
                    continue
                raise
            if not patches_inline:
                rec.patches = None
            w.append(rec)
        return w._count


def load_views(reader: DatasetReader,
               manifest: Optional[Sequence[ManifestRow]] = None) -> InMemoryViews:
    """Materialize a dataset into training arrays.

    When patches are not stored inline they are recomputed from the
    manifest images, which must be the same rows the file was extracted
    from (checked by content id).
    """
    n = len(reader)
    semantic = np.empty((n, 768), np.float32)
    fft = np.empty((n, 9), np.float32)
    stat = np.empty((n, 8), np.float32)
    patches = np.empty((n, pp.N_PATCHES, pp.PATCH_DIM), np.float32)
    labels = np.empty(n, np.int64)
    if not reader.patches_inline:
        if manifest is None:
            raise ConfigError(
                "dataset has no inline patches; a manifest is required to recompute them"
            )
        if len(manifest) != n:
            raise ShapeError(f"manifest rows {len(manifest)} != records {n}")
    for i, rec in enumerate(reader):
        semantic[i] = rec.semantic
        fft[i] = rec.fft
        stat[i] = rec.stat
        labels[i] = rec.label
        if reader.patches_inline:
            patches[i] = rec.patches
        else:
            img = decode_image(manifest[i].path)
            if content_id(img) != rec.content_id:
                raise FormatError(
                    f"{manifest[i].path}: content id does not match record {i}"
                )
            patches[i] = pp.unfold_patches(pp.normalize(pp.resize_bilinear(img)))
    return InMemoryViews(semantic, fft, stat, patches, labels)
