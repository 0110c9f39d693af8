"""Command line entry point: export-embeddings."""

from __future__ import annotations

import argparse
import sys

from .backbone import load_backbone
from .errors import ConfigError, DataError
from .export import export_embeddings, read_manifest


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="export-embeddings",
        description="Embed manifest images and write an SPCE embedding file.",
    )
    p.add_argument("--manifest", required=True, help="CSV manifest (path,label,split)")
    p.add_argument("--out", required=True, help="output .spce path")
    p.add_argument("--backbone", default="fixture",
                   help="embedding backbone: fixture (default) or torchvision")
    p.add_argument("--split", default=None, choices=["train", "val", "test"],
                   help="export only one split (default: all rows)")
    p.add_argument("--batch-size", type=int, default=8)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 1 if e.code else 0
    try:
        rows = read_manifest(args.manifest)
        backbone = load_backbone(args.backbone)
        result = export_embeddings(rows, backbone, args.out,
                                   split=args.split, batch_size=args.batch_size)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return 2
    print(f"wrote {result.written} embeddings to {args.out}"
          + (f" ({result.duplicates} duplicates skipped)" if result.duplicates else ""))
    return 0


def entry() -> None:
    raise SystemExit(main())
