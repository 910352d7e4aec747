"""CLI: extract --in DIR --out PATH [--crop 0.15] [--size 224] [--manifest CSV]."""

from __future__ import annotations

import argparse
import logging
import sys

from .backbone import RANDOM_WEIGHTS
from .extract import ExtractSpec, extract


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gpal-extract",
        description="Embed an image directory into a gpal feature file",
    )
    parser.add_argument("--in", dest="input_root", required=True, help="image root (class subdirectories)")
    parser.add_argument("--out", dest="output_path", required=True, help="feature file to write")
    parser.add_argument("--crop", type=float, default=0.15, help="top-crop fraction (default 0.15)")
    parser.add_argument("--size", type=int, default=224, help="model input side (default 224)")
    parser.add_argument("--manifest", help="CSV with path,label[,split] columns instead of subdirectories")
    parser.add_argument("--backbone", default="resnet50", help="trunk name (default resnet50)")
    parser.add_argument(
        "--weights",
        default=RANDOM_WEIGHTS,
        help='state-dict path, or "random" for a seeded untrained trunk',
    )
    parser.add_argument("--batch", type=int, default=16, help="inference batch size")
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.WARNING)
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code else 0
    try:
        spec = ExtractSpec(
            input_root=args.input_root,
            output_path=args.output_path,
            backbone=args.backbone,
            weights=args.weights,
            crop_fraction=args.crop,
            side=args.size,
            batch_size=args.batch,
            manifest=args.manifest,
        )
        report = extract(spec)
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    print(f"wrote {report.written} rows to {report.output_path}")
    if report.skipped:
        print(f"skipped {len(report.skipped)} unreadable images", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
