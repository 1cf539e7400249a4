"""F, V and Q of the shear family phi_eps = (w - 1 - eps)^{-3/2} as eps -> 0.

Prints the per-eps table, the fitted slopes against |log eps| (F, V) and
sqrt|log eps| (Q), and the leading Q coefficient implied by the F and V
slopes.  Extending the eps range shows how slowly the direct Q fit settles.
"""

import argparse
import math
import sys

from fefflab.families import shear_asymptotics

PI2 = math.pi**2


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--decades", type=int, nargs=2, default=(2, 6), help="eps from 1e-a to 1e-b (b <= 10; the grid resolves w = 1 down to 1e-12)")
    a = p.parse_args(argv)
    lo, hi = a.decades
    s = shear_asymptotics([10.0**-k for k in range(lo, hi + 1)])
    print(f"{'eps':>8} {'F':>12} {'V':>12} {'Q':>10} {'Q/pi^2/sqrt|log eps|':>22}")
    for e, F, V, Q in zip(s.eps, s.F, s.V, s.Q):
        print(f"{e:8.0e} {F:12.5f} {V:12.5f} {Q:10.5f} {Q / PI2 / math.sqrt(abs(math.log(e))):22.5f}")
    print(f"slope F / (2^(4/3) pi^2) = {s.slope_F / (2 ** (4 / 3) * PI2):.5f}")
    print(f"slope V / (4 pi)         = {s.slope_V / (4 * math.pi):.5f}")
    print(f"slope Q / pi^2           = {s.slope_Q / PI2:.5f}")
    print(f"slope_F^1.5/slope_V/pi^2 = {s.slope_Q_from_FV / PI2:.5f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
