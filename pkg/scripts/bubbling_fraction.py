"""Mass fraction of z_{2^-n} in B_delta: grid values against the continuum limit.

In 1D with s = 1/4 the critical density is z^4 ~ (1 + x^2/mu^2)^-1, so the
fraction in B_delta is (2/pi) atan(delta/mu).  The script shows how many
dyadic steps are needed before the fraction passes 0.9.
"""

import argparse
import warnings

import numpy as np

from fracpass.analysis import concentration_diagnostics
from fracpass.grid import make_grid
from fracpass.profiles import calibrate
from fracpass.solvers import default_sobolev_constant


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--n-max", type=int, default=8)
    ap.add_argument("--delta", type=float, default=0.1)
    ap.add_argument("--points", type=int, default=16384)
    args = ap.parse_args()
    s = 0.25
    g = make_grid(dim=1, half_width=8.0, points=args.points)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep = concentration_diagnostics(
            g, s, default_sobolev_constant(1, s), calibrate(g, s).c_ns, "bubbling", args.n_max, args.delta
        )
    print(f"{'n':>3} {'mu':>10} {'grid':>8} {'continuum':>10} {'relation':>9}")
    for t in rep.terms:
        cont = 2 / np.pi * np.arctan(args.delta / t["mu"])
        print(f"{t['n']:>3} {t['mu']:>10.5f} {t['ball_fraction']:>8.4f} {cont:>10.4f} {t['relation_ratio']:>9.4f}")


if __name__ == "__main__":
    main()
