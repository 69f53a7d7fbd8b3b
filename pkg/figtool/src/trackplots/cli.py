"""``plot`` command: render a figure from a metrics or benchmark CSV."""

from __future__ import annotations

import argparse
import sys

from .render import KINDS, FigureSpec, RenderError, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plot", description=__doc__)
    parser.add_argument("--kind", required=True, choices=KINDS)
    parser.add_argument("--in", dest="input_path", required=True, help="input CSV")
    parser.add_argument("--out", dest="output_path", required=True, help="output image")
    parser.add_argument(
        "--group-by",
        default="method",
        help="column that separates curves (default: method; ignored if absent)",
    )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = FigureSpec(
            input_path=args.input_path,
            kind=args.kind,
            output_path=args.output_path,
            group_by=args.group_by,
        )
        result = render(spec)
    except RenderError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    print(f"wrote {result.output_path} ({len(result.curves)} curve(s))")
    return 0


if __name__ == "__main__":
    sys.exit(main())
