"""Command line: starklab-render <figure_id> <input_dir> <output_path>."""

from __future__ import annotations

import argparse
import sys

from .io import InputError
from .recipes import RECIPES, render


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="starklab-render",
        description="Render static figures from starklab CSV outputs",
    )
    parser.add_argument("figure_id", choices=sorted(RECIPES))
    parser.add_argument("input_dir")
    parser.add_argument("output_path")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        path = render(args.figure_id, args.input_dir, args.output_path)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 1
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
