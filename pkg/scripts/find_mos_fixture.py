#!/usr/bin/env python3
"""Search small integer rating sets whose MOS cell renders as a target string.

    python3 scripts/find_mos_fixture.py --target "4.11 ± 0.08" --n 100

Scores are drawn from {3, 4, 5}; prints the first few (count_3, count_4,
count_5) splits that hit the target.
"""

import argparse

from svcpost.evaluation import mos_with_ci


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--target", default="4.11 ± 0.08")
    ap.add_argument("--n", type=int, default=100, help="ratings per cell")
    ap.add_argument("--limit", type=int, default=5)
    args = ap.parse_args()

    hits = 0
    for threes in range(args.n + 1):
        for fives in range(args.n - threes + 1):
            fours = args.n - threes - fives
            cell = mos_with_ci([3] * threes + [4] * fours + [5] * fives)
            if cell.format() == args.target:
                print(f"3x{threes} 4x{fours} 5x{fives}: mean={cell.mean:.4f} ci95={cell.ci_halfwidth:.4f}")
                hits += 1
                if hits >= args.limit:
                    return
    if not hits:
        print("no split found")


if __name__ == "__main__":
    main()
