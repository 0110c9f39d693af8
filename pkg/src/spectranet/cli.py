"""Command line entry point: the `spectra` tool.

Exit codes: 0 success, 1 usage/config problems, 2 data problems
(unreadable files, format violations, missing embeddings), 3 numeric
failures (non-finite values in a computation).
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from . import dataset as ds
from . import degradation as dg
from . import evaluation as ev
from . import model as md
from . import semantic as sm
from . import training as tr
from .errors import (ConfigError, FormatError, MissingEmbeddingError,
                     NumericError, ShapeError, UndefinedMetricError, UsageError)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2); we want code 1
        raise UsageError(message)


def _build_parser() -> _Parser:
    p = _Parser(prog="spectra", description="Multi-view synthetic-image detector")
    p.add_argument("--seed", type=int, default=None, help="global RNG seed (default 0)")
    p.add_argument("--config", type=Path, default=None,
                   help="key=value file overriding training defaults")
    sub = p.add_subparsers(dest="command", metavar="COMMAND")

    q = sub.add_parser("extract", help="build an SPDS dataset from a manifest")
    q.add_argument("--manifest", type=Path, required=True)
    q.add_argument("--out", type=Path, required=True)
    q.add_argument("--split", default="all", choices=("train", "val", "test", "all"))
    q.add_argument("--embeddings", type=Path, default=None, help="SPCE file for lookups")
    q.add_argument("--stub-fallback", action="store_true",
                   help="fall back to stub vectors for ids missing from --embeddings")
    q.add_argument("--no-patches", action="store_true", help="omit inline patch matrices")
    q.add_argument("--skip-undecodable", action="store_true")
    q.set_defaults(func=_cmd_extract)

    q = sub.add_parser("stub-embed", help="write stub embeddings for a manifest")
    q.add_argument("--manifest", type=Path, required=True)
    q.add_argument("--out", type=Path, required=True)
    q.set_defaults(func=_cmd_stub_embed)

    q = sub.add_parser("train", help="train from scratch on an SPDS dataset")
    q.add_argument("--dataset", type=Path, required=True)
    q.add_argument("--out", type=Path, required=True, help="output checkpoint path")
    q.add_argument("--manifest", type=Path, default=None,
                   help="needed to recompute patches when the dataset has none inline")
    q.add_argument("--epochs", type=int, default=None)
    q.add_argument("--lr", type=float, default=None)
    q.add_argument("--batch-size", type=int, default=None)
    q.add_argument("--weight-decay", type=float, default=None)
    q.add_argument("--log", type=Path, default=None, help="CSV training log")
    q.add_argument("--save-optimizer", action="store_true")
    q.set_defaults(func=_cmd_train)

    q = sub.add_parser("finetune", help="progressive degradation-stage fine-tuning")
    q.add_argument("--checkpoint", type=Path, required=True, help="base checkpoint")
    q.add_argument("--manifest", type=Path, required=True,
                   help="train-split images to degrade per stage")
    q.add_argument("--out-dir", type=Path, required=True)
    q.add_argument("--levels", default="1,2,3,4,5",
                   help="comma-separated degradation levels (1..5)")
    q.add_argument("--embeddings", type=Path, default=None)
    q.add_argument("--stub-fallback", action="store_true")
    q.add_argument("--epochs", type=int, default=None)
    q.add_argument("--lr", type=float, default=None)
    q.add_argument("--batch-size", type=int, default=None)
    q.add_argument("--weight-decay", type=float, default=None)
    q.set_defaults(func=_cmd_finetune)

    q = sub.add_parser("evaluate", help="metrics for a checkpoint on a dataset")
    q.add_argument("--dataset", type=Path, required=True)
    q.add_argument("--checkpoint", type=Path, required=True)
    q.add_argument("--name", default="test", help="split label in the report")
    q.add_argument("--csv", type=Path, default=None, help="also write CSV here")
    q.set_defaults(func=_cmd_evaluate)

    q = sub.add_parser("infer", help="classify one image and dump its heatmap")
    q.add_argument("--image", type=Path, required=True)
    q.add_argument("--checkpoint", type=Path, required=True)
    q.add_argument("--embeddings", type=Path, default=None)
    q.add_argument("--stub-fallback", action="store_true")
    q.set_defaults(func=_cmd_infer)

    q = sub.add_parser("degrade", help="apply a degradation level to a directory")
    q.add_argument("--level", type=int, required=True, help="1..5")
    q.add_argument("--in", dest="in_dir", type=Path, required=True)
    q.add_argument("--out", dest="out_dir", type=Path, required=True)
    q.set_defaults(func=_cmd_degrade)

    q = sub.add_parser("inspect", help="dump one dataset record as text")
    q.add_argument("--dataset", type=Path, required=True)
    q.add_argument("--index", type=int, required=True)
    q.add_argument("--patches", action="store_true", help="include the patch matrix")
    q.set_defaults(func=_cmd_inspect)
    return p


def _read_config(path: Optional[Path]) -> Dict[str, str]:
    """Line-oriented key=value file; # comments and blank lines allowed."""
    if path is None:
        return {}
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    out: Dict[str, str] = {}
    for ln, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{ln}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


_CONFIG_KEYS = ("lr", "weight_decay", "batch_size", "epochs", "seed")


def _train_config(args, defaults: tr.TrainConfig) -> tr.TrainConfig:
    """Merge defaults < config file < explicit flags into a TrainConfig."""
    values = dataclasses.asdict(defaults)
    cfg_file = _read_config(args.config)
    for key, raw in cfg_file.items():
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"unknown config key {key!r} (allowed: {', '.join(_CONFIG_KEYS)})")
        try:
            values[key] = int(raw) if key in ("batch_size", "epochs", "seed") else float(raw)
        except ValueError:
            raise ConfigError(f"config key {key}: cannot parse {raw!r}") from None
    for key in ("lr", "weight_decay", "batch_size", "epochs"):
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    if args.seed is not None:
        values["seed"] = args.seed
    return tr.TrainConfig(**values)


def _provider(args) -> sm.SemanticProvider:
    emb_path = getattr(args, "embeddings", None)
    if emb_path is None:
        return sm.SemanticProvider()
    return sm.SemanticProvider(sm.EmbeddingFile(emb_path),
                               fallback_to_stub=args.stub_fallback)


def _manifest_rows(path: Path, split: str = "all") -> List[ds.ManifestRow]:
    rows = ds.read_manifest(path)
    if split != "all":
        rows = [r for r in rows if r.split == split]
    if not rows:
        raise FormatError(f"{path}: no rows for split {split!r}")
    return rows


def _cmd_extract(args) -> int:
    rows = _manifest_rows(args.manifest, args.split)
    n = ds.extract(rows, _provider(args), args.out,
                   patches_inline=not args.no_patches,
                   skip_undecodable=args.skip_undecodable)
    print(f"wrote {n} records to {args.out}")
    return 0


def _cmd_stub_embed(args) -> int:
    rows = _manifest_rows(args.manifest)
    records = []
    seen = set()
    for row in rows:
        cid = ds.content_id(ds.decode_image(row.path))
        if cid in seen:
            continue
        seen.add(cid)
        records.append((cid, sm.stub(cid)))
    n = sm.write_embeddings(args.out, records)
    print(f"wrote {n} stub embeddings to {args.out}")
    return 0


def _cmd_train(args) -> int:
    cfg = _train_config(args, tr.TrainConfig())
    with ds.DatasetReader(args.dataset) as reader:
        manifest = _manifest_rows(args.manifest) if args.manifest else None
        source = ds.load_views(reader, manifest)
    params = md.ModelParams.init(cfg.seed)
    opt, history = tr.fit(source, params, cfg, log_path=args.log)
    md.save_checkpoint(args.out, params, opt.state() if args.save_optimizer else None)
    final = history[-1][1] if history else float("nan")
    print(f"trained {cfg.epochs} epochs, final loss {final:.6f}, saved {args.out}")
    return 0


def _parse_levels(spec: str) -> List[dg.DegradationLevel]:
    levels = []
    for part in spec.split(","):
        part = part.strip()
        if not part.isdigit() or not 1 <= int(part) <= len(dg.LEVELS):
            raise ConfigError(f"bad degradation level {part!r} (expected 1..{len(dg.LEVELS)})")
        levels.append(dg.LEVELS[int(part) - 1])
    return levels


def _cmd_finetune(args) -> int:
    cfg = _train_config(args, tr.TrainConfig.finetune())
    levels = _parse_levels(args.levels)
    rows = _manifest_rows(args.manifest, "train")
    provider = _provider(args)

    def make_source(level: dg.DegradationLevel):
        def build():
            n = len(rows)
            semantic = np.empty((n, 768), np.float32)
            fft = np.empty((n, 9), np.float32)
            stat = np.empty((n, 8), np.float32)
            patches = np.empty((n, md.N_PATCHES, 243), np.float32)
            labels = np.empty(n, np.int64)
            for i, row in enumerate(rows):
                img = dg.apply_level(ds.decode_image(row.path), level)
                cid = ds.content_id(img)
                semantic[i] = provider.get(cid)
                fft[i], stat[i], patches[i] = ds.extract_views(img)
                labels[i] = row.label
            return tr.InMemoryViews(semantic, fft, stat, patches, labels)
        return build

    results = tr.progressive_finetune(
        args.checkpoint, [make_source(lv) for lv in levels], cfg, args.out_dir)
    for lv, res in zip(levels, results):
        print(f"stage {res.level_index + 1} (sigma={lv.sigma}, Q={lv.quality}): "
              f"final loss {res.losses[-1]:.6f} -> {res.checkpoint}")
    return 0


def _cmd_evaluate(args) -> int:
    params, _ = md.load_checkpoint(args.checkpoint)
    with ds.DatasetReader(args.dataset) as reader:
        report = ev.evaluate(params, reader)
    reports = {args.name: report}
    sys.stdout.write(ev.render_table(reports))
    if args.csv is not None:
        args.csv.write_text(ev.report_csv(reports))
        print(f"wrote {args.csv}")
    return 0


def _write_heatmap(image_path: Path, heatmap: np.ndarray) -> tuple[Path, Path]:
    """PGM (min-max scaled) plus CSV (raw logits) next to the image."""
    pgm = image_path.with_suffix(".heatmap.pgm")
    csv_path = image_path.with_suffix(".heatmap.csv")
    lo = float(heatmap.min())
    hi = float(heatmap.max())
    scale = 255.0 / (hi - lo) if hi > lo else 0.0
    pixels = np.floor((heatmap - lo) * scale + 0.5).astype(np.uint8)
    with open(pgm, "wb") as f:
        f.write(f"P5\n{heatmap.shape[1]} {heatmap.shape[0]}\n255\n".encode())
        f.write(pixels.tobytes())
    np.savetxt(csv_path, heatmap, delimiter=",", fmt="%.9g")
    return pgm, csv_path


def _cmd_infer(args) -> int:
    params, _ = md.load_checkpoint(args.checkpoint)
    rec = ds.extract_record(args.image, 0, _provider(args))
    pred = md.forward(rec, params)
    pgm, csv_path = _write_heatmap(args.image, pred.heatmap)
    print(f"probability_fake {pred.probability:.6f}")
    print(f"logit {pred.logit:.6f}")
    print(f"heatmap {pgm} {csv_path}")
    return 0


_IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


def _cmd_degrade(args) -> int:
    if not 1 <= args.level <= len(dg.LEVELS):
        raise ConfigError(f"--level must be 1..{len(dg.LEVELS)}, got {args.level}")
    level = dg.LEVELS[args.level - 1]
    if not args.in_dir.is_dir():
        raise FormatError(f"not a directory: {args.in_dir}")
    args.out_dir.mkdir(parents=True, exist_ok=True)
    paths = sorted(p for p in args.in_dir.iterdir()
                   if p.suffix.lower() in _IMAGE_SUFFIXES)
    if not paths:
        raise FormatError(f"no images in {args.in_dir}")
    from PIL import Image

    for p in paths:
        out = dg.apply_level(ds.decode_image(p), level)
        # PNG output so the degraded pixels survive saving losslessly
        Image.fromarray(out, "RGB").save(args.out_dir / (p.stem + ".png"))
    print(f"degraded {len(paths)} images at sigma={level.sigma}, Q={level.quality} "
          f"into {args.out_dir}")
    return 0


def _cmd_inspect(args) -> int:
    with ds.DatasetReader(args.dataset) as reader:
        rec = reader.read_record(args.index)
        print(f"file {args.dataset}: {len(reader)} records, "
              f"patches_inline={reader.patches_inline}")
    print(f"record {args.index}")
    print(f"content_id {rec.content_id.hex()}")
    print(f"label {rec.label}")
    with np.printoptions(threshold=np.inf, linewidth=120, precision=6):
        print(f"semantic {rec.semantic}")
        print(f"fft {rec.fft}")
        print(f"stat {rec.stat}")
        if args.patches:
            if rec.patches is None:
                print("patches none (not stored inline)")
            else:
                print(f"patches {rec.patches}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "func", None) is None:
            parser.print_help(sys.stderr)
            return 1
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    except (FormatError, MissingEmbeddingError, UndefinedMetricError, ShapeError,
            IndexError, FileNotFoundError, IsADirectoryError, PermissionError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return 2
    except NumericError as e:
        print(f"numeric error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
