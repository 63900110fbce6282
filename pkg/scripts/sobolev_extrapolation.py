"""Sobolev quotient of the cut-off bubble against box size, and its extrapolation."""

import argparse

import numpy as np

from fracpass.grid import make_grid
from fracpass.profiles import extrapolated_sobolev_constant, sobolev_constant_estimate


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dim", type=int, default=1)
    ap.add_argument("--s", type=float, default=0.25)
    ap.add_argument("--widths", type=float, nargs="+", default=[16.0, 64.0, 256.0, 1024.0])
    ap.add_argument("--ppu", type=int, default=8, help="points per unit length")
    args = ap.parse_args()
    for L in args.widths:
        m = int(2 ** np.ceil(np.log2(2 * L * args.ppu)))
        est = sobolev_constant_estimate(make_grid(dim=args.dim, half_width=L, points=m), args.s, c_ns=1.0, cut=True)
        print(f"L={L:>8g} M={m:>7d}  S_L={est.S_hat:.6f}")
    if len(args.widths) >= 3:
        ext = extrapolated_sobolev_constant(args.dim, args.s, args.widths[-3:], args.ppu)
        print(f"extrapolated S={ext.S_hat:.6f}  S^(N/2s)={ext.S_pow:.4f}  c_ns={ext.c_ns:.4f}")


if __name__ == "__main__":
    main()
