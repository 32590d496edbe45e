#!/usr/bin/env python3
"""Full Jacobi occupation-time domination sweep.

Runs the occupation-time concentration bound for Jacobi(a=1, b=2, sigma2=2)
with f = 1_{(0, 1/2)} against a 10^4-path Euler-Maruyama ensemble on the
default (t, eps) grid and writes grid CSV + manifest next to this script's
output directory.  Expect a few minutes on one core.
"""

import pathlib
import sys

from ergobound import cli

OUT_DIR = pathlib.Path(__file__).resolve().parent.parent / "results"


def main() -> int:
    OUT_DIR.mkdir(exist_ok=True)
    out = OUT_DIR / "jacobi_verify.csv"
    argv = [
        "verify", "--model", "jacobi", "--a", "1", "--b", "2", "--sigma2", "2",
        "--t-grid", "100", "200", "400",
        "--eps-grid", "0.05", "0.1", "0.2",
        "--n-paths", "10000", "--dt", "0.001",
        "--seed", "20240901", "--jobs", "1",
        "--out", str(out),
    ] + sys.argv[1:]
    code = cli.main(argv)
    print(f"wrote {out} (exit {code})")
    return code


if __name__ == "__main__":
    sys.exit(main())
