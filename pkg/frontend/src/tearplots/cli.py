"""Command line: render one figure from simulation outputs.

    render_figure <figure-id> --data <run-or-study-dir> --out <image>
"""

from __future__ import annotations

import argparse
import sys

from .figures import FIGURES, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="render_figure",
        description="Regenerate a paper-style figure from solver outputs",
    )
    parser.add_argument("figure", choices=sorted(FIGURES),
                        help="figure identifier")
    parser.add_argument("--data", required=True,
                        help="run or study output directory")
    parser.add_argument("--out", required=True, help="output image path")
    args = parser.parse_args(argv)
    try:
        path = render(args.figure, args.data, args.out)
    except (ValueError, OSError) as exc:
        print(f"render failed: {exc}", file=sys.stderr)
        return 1
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
