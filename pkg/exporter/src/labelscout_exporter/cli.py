"""Command line entry point for the export adapters."""
from __future__ import annotations

import argparse
import sys
import traceback

from .encoders import EncoderError
from .export import ExportJob, export_affinity, export_text_embeddings
from .formats import FormatError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="labelscout-export",
        description="Populate labelscout input files from upstream sources.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    text = sub.add_parser(
        "text-embeddings",
        help="encode a vocabulary into phrase/action/object PRSE files",
    )
    text.add_argument("--vocab", required=True, help="vocabulary file")
    text.add_argument("--model", default="stub",
                      help="encoder backend, e.g. stub or stub:32")
    text.add_argument("--output", required=True, help="output directory")

    aff = sub.add_parser(
        "affinity",
        help="derive an affinity file from an offline edge dump",
    )
    aff.add_argument("--vocab", required=True, help="vocabulary file")
    aff.add_argument("--dump", required=True,
                     help="ConceptNet-style assertion dump (TSV)")
    aff.add_argument("--output", required=True, help="output affinity file")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "text-embeddings":
            job = ExportJob("text-embedding", args.model, args.vocab, args.output)
            paths = export_text_embeddings(job)
            for role in ("phrases", "actions", "objects"):
                print(f"wrote {role}: {paths[role]}")
        else:
            job = ExportJob("affinity", args.dump, args.vocab, args.output)
            out_path = export_affinity(job)
            n_lines = sum(1 for _ in open(out_path, encoding="utf-8"))
            print(f"wrote {n_lines} affinity lines: {out_path}")
        return 0
    except (EncoderError, FormatError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception:
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
