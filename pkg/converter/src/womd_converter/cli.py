"""womd-convert: turn scenario shards into a scene file plus a summary.

Exit codes: 0 success, 1 internal failure, 2 bad input.
"""

import argparse
import sys
import traceback
from pathlib import Path

from .convert import convert, iter_shard_files


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="womd-convert", description=__doc__)
    parser.add_argument("input_dir", help="directory holding *.tfrecord* scenario shards")
    parser.add_argument("--out", required=True, help="scene file to write")
    parser.add_argument("--max-scenes", type=int, default=None, help="cap on emitted scenes (0 = summary only)")
    parser.add_argument("--pattern", default="*.tfrecord*", help="shard filename glob")
    parser.add_argument("--summary", help="write the run summary as JSON to this path")
    parser.add_argument("--no-verify-checksums", action="store_true",
                        help="skip payload checksums (faster on large shards)")
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        input_dir = Path(args.input_dir)
        if not input_dir.is_dir():
            print(f"error: {input_dir} is not a directory", file=sys.stderr)
            return 2
        if not iter_shard_files(input_dir, args.pattern):
            print(f"error: no shards matching {args.pattern!r} under {input_dir}", file=sys.stderr)
            return 2
        summary = convert(
            input_dir,
            args.out,
            max_scenes=args.max_scenes,
            pattern=args.pattern,
            verify_checksums=not args.no_verify_checksums,
            warn=lambda msg: print(f"warning: {msg}", file=sys.stderr),
        )
        summary.print_human(sys.stdout)
        if args.summary:
            Path(args.summary).write_text(summary.to_json() + "\n", encoding="utf-8")
        return 0
    except Exception:
        traceback.print_exc()
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
