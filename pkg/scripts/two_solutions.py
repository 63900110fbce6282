"""Local minimum and mountain-pass solution for one configuration.

Prints the energies, residuals and the path supremum against the threshold
for a sweep of bubble scales, then writes u_eps, v and u_eps + v.
"""

import argparse
from pathlib import Path

from fracpass.energies import HSpec, h1_ball, make_params
from fracpass.grid import make_grid, write_field
from fracpass.profiles import BubbleSpec, CutoffSpec, extrapolated_sobolev_constant
from fracpass.solvers import SolveOptions, mp_path_sup, solve_local_min, solve_mountain_pass


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--eps", type=float, default=5.0)
    ap.add_argument("--points", type=int, default=4096)
    ap.add_argument("--mus", type=float, nargs="+", default=[0.05, 0.1, 0.2])
    ap.add_argument("--out", type=Path, default=None)
    args = ap.parse_args()
    s, q = 0.25, 0.5
    g = make_grid(dim=1, half_width=8.0, points=args.points)
    params = make_params(g, s, q, args.eps, HSpec(width=1.0))
    ext = extrapolated_sobolev_constant(1, s)
    thr = 0.25 * ext.S_pow
    loc = solve_local_min(params, SolveOptions(), ext.S_hat)
    print(f"local min: f={loc.energy:.6g} [u]={loc.seminorm:.4g} rho={loc.info['rho']:.4g} res={loc.residual:.2e} iters={loc.iters}")
    center, radius, _ = h1_ball(params.h)
    cut = CutoffSpec(radius, tuple(center))
    for mu in args.mus:
        ps = mp_path_sup(params, loc.u, BubbleSpec(mu, cut.x0, ext.c_ns), cut)
        print(f"mu={mu:<6g} sup I={ps.sup_I:.4f} sup I*={ps.sup_Istar:.4f} threshold={thr:.4f}")
    spec = BubbleSpec(min(args.mus), cut.x0, ext.c_ns)
    mp = solve_mountain_pass(params, loc.u, SolveOptions(), spec, cut)
    print(f"mountain pass: I(v)={mp.energy:.6g} [v]={mp.seminorm:.4g} min(v)={mp.min_value:.3g} res={mp.residual:.2e} iters={mp.iters}")
    print(f"u_eps + v: f-residual {mp.info['residual_f']:.2e}")
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        write_field(loc.u, args.out / "u_eps.field")
        write_field(mp.u, args.out / "v.field")
        write_field(mp.info["u_tilde"], args.out / "u_tilde.field")


if __name__ == "__main__":
    main()
