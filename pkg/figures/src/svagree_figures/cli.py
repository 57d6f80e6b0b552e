"""Command line: figures <kind> <in.csv> <out-image>.

Kinds: strata-line, strata-bar, histogram, pca, units, predictions.
The stratified kinds take --family to pick the stratum family
(attractors, distance, rc, last, subject).
"""

from __future__ import annotations

import argparse
import sys

from .render import RENDERERS, ContractError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="figures", description="Render svagree report CSVs to image files."
    )
    parser.add_argument("kind", choices=sorted(RENDERERS))
    parser.add_argument("input", help="input CSV (report/histogram/pca/trace contract)")
    parser.add_argument("output", help="output image path (.png, .pdf, .svg)")
    parser.add_argument(
        "--family",
        default=None,
        help="stratum family for strata-line/strata-bar "
        "(default: attractors for lines, rc for bars)",
    )
    parser.add_argument(
        "--max-units", type=int, default=None, help="limit panels in the units grid"
    )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    renderer = RENDERERS[args.kind]
    kwargs = {}
    if args.kind in ("strata-line", "strata-bar") and args.family:
        kwargs["family"] = args.family
    if args.kind == "units" and args.max_units is not None:
        kwargs["max_units"] = args.max_units
    try:
        renderer(args.input, args.output, **kwargs)
    except (ContractError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
