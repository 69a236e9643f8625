"""Command-line front end: ``bipcover-plots``.

Renders one figure per invocation from a schema=1 CSV.  If the output path
has a .png or .svg suffix exactly that file is written; otherwise the path
is treated as a stem and both stem.png and stem.svg are emitted.

Exit codes: 0 success, 2 usage / schema / rendering error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .plots import FIGURE_KINDS, FigureSpec, PlotsError, render

_AXES_SLOTS = ("x", "y", "series", "panel", "row", "col")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bipcover-plots",
        description="Render bipcover sweep/simulate CSV output as figures.",
    )
    parser.add_argument("--kind", choices=FIGURE_KINDS, required=True,
                        help="figure kind")
    parser.add_argument("-i", "--input", required=True, help="schema=1 CSV path")
    parser.add_argument("-o", "--output", required=True,
                        help="image path (.png or .svg), or a stem for both")
    for slot in _AXES_SLOTS:
        parser.add_argument(f"--{slot}", default=None, metavar="COLUMN",
                            help=f"override the {slot!r} column ('none' disables it)")
    parser.add_argument("--log-x", action=argparse.BooleanOptionalAction, default=None,
                        help="force the x axis to log scale (default: kind-specific)")
    parser.add_argument("--log-y", action=argparse.BooleanOptionalAction, default=None,
                        help="force the y axis to log scale (default: kind-specific)")
    return parser


def _axes_overrides(args: argparse.Namespace) -> dict:
    overrides: dict[str, str | None] = {}
    for slot in _AXES_SLOTS:
        value = getattr(args, slot)
        if value is not None:
            overrides[slot] = None if value.lower() == "none" else value
    return overrides


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    output = Path(args.output)
    if output.suffix.lower() in (".png", ".svg"):
        outputs = [output]
    else:
        outputs = [output.with_suffix(".png"), output.with_suffix(".svg")]
    overrides = _axes_overrides(args)
    try:
        for path in outputs:
            spec = FigureSpec(
                csv_path=args.input,
                kind=args.kind,
                output=path,
                axes=overrides,
                log_x=args.log_x,
                log_y=args.log_y,
            )
            print(render(spec))
    except PlotsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
