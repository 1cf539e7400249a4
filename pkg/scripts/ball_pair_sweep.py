"""Sweep q(R, theta) over the closed parameter region and locate its minimum.

Writes the sweep as CSV (header R,theta,q) and prints the minimiser.
"""

import argparse
import math
import sys

import numpy as np

from fefflab.families import minimize_q, sweep_q


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--nR", type=int, default=41)
    p.add_argument("--ntheta", type=int, default=41)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--csv", default="ball_pair_sweep.csv")
    a = p.parse_args(argv)
    sw = sweep_q(np.linspace(0, 1, a.nR), np.linspace(0, math.pi - a.delta, a.ntheta))
    with open(a.csv, "w") as fh:
        fh.write(sw.to_csv())
    r = minimize_q(delta=a.delta)
    print(f"sweep written to {a.csv}")
    print(f"minimum q = {r.q:.6f} at R = {r.R:.6f}, theta = {r.theta:.6f} (8 pi = {8 * math.pi:.6f})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
