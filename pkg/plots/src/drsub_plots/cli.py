"""`plots <csv> <outdir>`: render the four benchmark panels."""

from __future__ import annotations

import sys

from .core import SchemaError, render


def main(argv: list[str] | None = None) -> int:
    args = sys.argv[1:] if argv is None else argv
    if len(args) != 2:
        print("usage: plots <csv> <outdir>", file=sys.stderr)
        return 1
    csv_path, out_dir = args
    try:
        written = render(csv_path, out_dir)
    except (SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


def entry() -> None:
    raise SystemExit(main())
