"""Bump perturbations of the Heisenberg patch over [-1, 1]^3.

For each bump: the eps^2 coefficient of F from a polynomial fit, the two
closed forms (quoted and corrected), both sides of the cubic identity, and
whether max Ft_zzb <= 1/3 together with F above the flat value occurs.
"""

import argparse
import itertools
import sys

from fefflab.measures import Box
from fefflab.variation import (
    BumpField,
    cube_simp_check,
    eps_fit_oracle,
    heis_second_variation,
    heis_second_variation_exact,
    heis_semiglobal_check,
    heisenberg_family,
)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--n", type=int, default=64)
    a = p.parse_args(argv)
    base = Box(((-1, 1),) * 3)
    print("second variation: fit / quoted / corrected; cubic identity rel. diff: quoted / corrected")
    for half, tilt in itertools.product((0.5, 0.8), ((0, 0, 0), (0.4, -0.2, 0.3))):
        bump = BumpField.single(half=(half,) * 3, amplitude=0.3, tilt=tilt)
        fam = heisenberg_family(bump, base, n=a.n)
        fit = eps_fit_oracle(fam, "F")[2]
        q, e = heis_second_variation(bump, fam.grid), heis_second_variation_exact(bump, fam.grid)
        cube = cube_simp_check(bump, base, fam.grid)
        print(f"half={half} tilt={tilt}: {fit:+.5f} / {q:+.5f} / {e:+.5f}; "
              f"{cube.rel_diff:.2e} / {cube.rel_diff_exact:.2e}")
    print("\nsmall round bumps: amplitude, max Ft_zzb, F - flat")
    for amp in (0.005, 0.01, 0.02, 0.04):
        s = heis_semiglobal_check(BumpField.single(half=(0.8,) * 3, amplitude=amp), base, n=a.n)
        flag = "  <- Ft_zzb <= 1/3 but F above flat" if s.hypothesis_holds and not s.conclusion_holds else ""
        print(f"{amp:6.3f} {s.max_Ft_zzb:8.4f} {s.fefferman - s.flat_value:+.3e}{flag}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
