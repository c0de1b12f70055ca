#!/usr/bin/env python3
"""Print the crossover pair's magnitude response at a few probe frequencies
and optionally export the taps (one per line)."""

import argparse

import numpy as np

from svcpost.dsp import crossover


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--cutoff-hz", type=float, default=10_000)
    ap.add_argument("--rate", type=int, default=48_000)
    ap.add_argument("--taps", type=int, default=511)
    ap.add_argument("--export", metavar="PREFIX", help="write PREFIX_lp.txt and PREFIX_hp.txt")
    args = ap.parse_args()

    lp, hp = crossover(args.cutoff_hz, args.rate, args.taps)
    probes = np.array([0, 1000, 5000, 9000, 9500, 10_000, 10_500, 11_000, 12_000, 16_000, 20_000, 24_000], dtype=float)
    probes = probes[probes <= args.rate / 2]
    lp_db, hp_db = lp.magnitude_db(probes), hp.magnitude_db(probes)
    print(f"taps={lp.num_taps} group_delay={lp.group_delay_samples} lp_dc={lp.dc_gain:.9f} hp_dc={hp.dc_gain:.2e}")
    print(f"{'freq_hz':>8} {'lp_db':>9} {'hp_db':>9}")
    for f, a, b in zip(probes, lp_db, hp_db):
        print(f"{f:8.0f} {a:9.2f} {b:9.2f}")
    grid = np.linspace(args.cutoff_hz + 2000, args.rate / 2, 400)
    print(f"worst lowpass stopband from {grid[0]:.0f} Hz: {lp.magnitude_db(grid).max():.1f} dB")
    if args.export:
        lp.save(f"{args.export}_lp.txt")
        hp.save(f"{args.export}_hp.txt")


if __name__ == "__main__":
    main()
