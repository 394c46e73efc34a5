"""Command line entry point: `embed-export export ...`."""

import argparse
import logging
import sys
from pathlib import Path

from .export import ExportConfig, ExportError, export


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embed-export",
        description="Dump per-layer contextual embeddings for a corpus.")
    subs = parser.add_subparsers(dest="command", required=True)
    p = subs.add_parser("export", help="run the encoder and write an embedding file")
    p.add_argument("--model", required=True, help="model name or local path")
    p.add_argument("--corpus", required=True, help="corpus file (JSON lines)")
    p.add_argument("--out", required=True,
                   help="output file, or a directory for embeddings.hmeb")
    p.add_argument("--pooling", choices=("first", "mean"), default="first",
                   help="subword-to-word pooling (default: first subtoken)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    out = Path(args.out)
    if out.is_dir():
        out = out / "embeddings.hmeb"
    try:
        count = export(ExportConfig(model=args.model, corpus=args.corpus,
                                    out=str(out), pooling=args.pooling))
    except (ExportError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {count} documents to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
