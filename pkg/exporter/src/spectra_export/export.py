"""Manifest-driven embedding export.

Reads the same CSV manifest the detector consumes (path,label,split with
an optional header), preprocesses each image through the bit-compatible
resize + normalize path, embeds, and writes one SPCE file keyed by
content id. Duplicate content ids are skipped, first occurrence wins, so
re-listed files cannot corrupt the output.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

from . import preprocess as pp
from . import spce
from .errors import ConfigError, DataError
from .identity import content_id

_SPLITS = ("train", "val", "test")


@dataclass
class ManifestRow:
    path: str
    label: int
    split: str


@dataclass
class ExportResult:
    written: int
    duplicates: int


def read_manifest(path: str) -> list[ManifestRow]:
    """Parse a path,label,split CSV; the header row is optional."""
    if not os.path.isfile(path):
        raise DataError(f"manifest not found: {path}")
    rows: list[ManifestRow] = []
    base = os.path.dirname(os.path.abspath(path))
    with open(path, newline="") as fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if not rec or (lineno == 1 and rec[0].strip().lower() == "path"):
                continue
            if len(rec) != 3:
                raise DataError(f"manifest line {lineno}: expected 3 fields, got {len(rec)}")
            raw_path, raw_label, raw_split = (f.strip() for f in rec)
            try:
                label = int(raw_label)
            except ValueError:
                raise DataError(f"manifest line {lineno}: bad label {raw_label!r}") from None
            if label not in (0, 1):
                raise DataError(f"manifest line {lineno}: label must be 0 or 1, got {label}")
            if raw_split not in _SPLITS:
                raise DataError(f"manifest line {lineno}: bad split {raw_split!r}")
            img_path = raw_path if os.path.isabs(raw_path) else os.path.join(base, raw_path)
            rows.append(ManifestRow(img_path, label, raw_split))
    if not rows:
        raise DataError(f"manifest has no entries: {path}")
    return rows


def export_embeddings(rows, backbone, out_path: str, split: str | None = None,
                      batch_size: int = 8) -> ExportResult:
    """Embed every distinct image and write an SPCE file.

    Returns counts of records written and duplicate ids skipped.
    """
    if batch_size < 1:
        raise ConfigError(f"batch_size must be >= 1, got {batch_size}")
    if split is not None and split not in _SPLITS:
        raise ConfigError(f"bad split filter {split!r}")
    selected = [r for r in rows if split is None or r.split == split]
    if not selected:
        raise DataError("no manifest rows match the requested split")

    ids: list[bytes] = []
    tensors: list[np.ndarray] = []
    seen: set[bytes] = set()
    duplicates = 0
    for row in selected:
        pixels = pp.decode_image(row.path)
        cid = content_id(pixels)
        if cid in seen:
            duplicates += 1
            continue
        seen.add(cid)
        ids.append(cid)
        tensors.append(pp.normalize(pp.resize_to_canonical(pixels)))

    embeddings: dict[bytes, np.ndarray] = {}
    for start in range(0, len(ids), batch_size):
        chunk = np.stack(tensors[start:start + batch_size])
        vecs = np.asarray(backbone.embed(chunk))
        if vecs.ndim != 2 or vecs.shape[0] != chunk.shape[0] or vecs.shape[1] != spce.DIM:
            raise DataError(
                f"backbone {backbone.name!r} produced shape {vecs.shape}; "
                f"the detector requires ({chunk.shape[0]}, {spce.DIM})"
            )
        for i, cid in enumerate(ids[start:start + batch_size]):
            embeddings[cid] = vecs[i]

    written = spce.write(out_path, embeddings.items())
    return ExportResult(written=written, duplicates=duplicates)
