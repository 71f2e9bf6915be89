"""Support-function estimate of the distance between empirical and population profile sets."""
from __future__ import annotations

import argparse

import numpy as np

from graphon_cocluster.geometry import g_support_empirical, g_support_population, hausdorff_estimate
from graphon_cocluster.graphon import make_rng, resolve_graphon


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--graphon", default="four_block")
    ap.add_argument("--rows", type=int, default=20)
    ap.add_argument("--K", type=int, default=2)
    ap.add_argument("--directions", type=int, default=500)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    g = resolve_graphon(args.graphon)
    x = make_rng(args.seed, 0).random(args.rows)
    pop = g_support_population(g, x, args.K)
    for n in (100, 200, 400, 800, 1600, 3200):
        est = [hausdorff_estimate(g_support_empirical(g, x, make_rng(args.seed, n, r).random(n), args.K),
                                  pop, args.directions, r) for r in range(10)]
        print(f"n={n:5d}  median lower bound on the distance {np.median(est):.5f}")


if __name__ == "__main__":
    main()
