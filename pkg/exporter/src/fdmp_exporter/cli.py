"""`fdmp-export`: arrays-in, FDMP-out.

    fdmp-export --arrays run42.npz --domain LI --factor 4 --out li.fdmp

The .npz container holds `features` (H, W, d), `probs` (H, W, C), and
optionally `labels` (H, W) with -1 for unlabeled pixels.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .export import ExportError, ExportSpec, export, load_container


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fdmp-export", description=__doc__.split("\n")[0])
    parser.add_argument("--arrays", required=True, help=".npz container with features/probs[/labels]")
    parser.add_argument("--domain", choices=("LI", "HI"), default="LI")
    parser.add_argument("--factor", type=int, default=1, help="block-mean downscale factor")
    parser.add_argument("--out", default="out.fdmp")
    parser.add_argument("--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        arrays = load_container(args.arrays)
        spec = ExportSpec(
            features=arrays["features"],
            probs=arrays["probs"],
            labels=arrays.get("labels"),
            domain=args.domain,
            factor=args.factor,
            out_path=args.out,
        )
        export(spec)
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
