"""Energy functionals f_eps and I_eps, their pairings and discrete gradients.

    f_eps(u) = 1/2 [u]^2 - eps/(q+1) int h u_+^(q+1) - 1/p* int u_+^p*
    I_eps(v) = 1/2 [v]^2 - int G(x, v)

with p* = 2N/(N-2s) the critical exponent and G the primitive of the
nonlinearity shifted by a fixed nonnegative u_eps.  Gradients are Riesz
representers for the discrete L^2 product ``w * sum(a * b)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy import ndimage
from scipy.special import binom

from .errors import ConfigurationError, HypothesisH1Error
from .grid import Field, Grid, check_same_grid, integrate, lp_norm, sample_field
from .nonlocal_ops import bilinear_form, check_order, critical_exponent, frac_laplacian, gagliardo_seminorm_sq

NEG_SLACK = 1e-10


@dataclass(frozen=True)
class HSpec:
    """A concrete weight h satisfying (h0) and, on its positive core, (h1).

    ``signed_pair`` is the bump at ``center`` minus ``neg_ratio`` times the
    same bump shifted by ``offset`` along the first axis.
    """

    family: Literal["gaussian_bump", "compact_bump", "signed_pair"] = "gaussian_bump"
    amplitude: float = 1.0
    center: tuple = (0.0,)
    width: float = 1.0
    neg_ratio: float = 0.5
    offset: float = 3.0

    def __post_init__(self):
        if self.family not in ("gaussian_bump", "compact_bump", "signed_pair"):
            raise ConfigurationError(f"unknown h family {self.family!r}")
        if not self.width > 0:
            raise ConfigurationError("h width must be positive")
        if not self.amplitude > 0:
            raise ConfigurationError("h amplitude must be positive")
        if self.family == "signed_pair" and not 0 <= self.neg_ratio < 1:
            raise ConfigurationError("signed_pair needs 0 <= neg_ratio < 1")
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))


def _smoothstep_profile(rho):
    """1 on [0, 1/2], quintic smoothstep down to 0 on [1/2, 1], 0 beyond."""
    t = np.clip(2.0 * rho - 1.0, 0.0, 1.0)
    return 1.0 - t**3 * (10.0 - 15.0 * t + 6.0 * t**2)


def make_h(grid: Grid, spec: HSpec) -> Field:
    c = np.zeros(grid.dim)
    c[: len(spec.center)] = spec.center[: grid.dim]

    def bump(center):
        r = grid.radius(center) / spec.width
        if spec.family == "compact_bump":
            return _smoothstep_profile(r)
        return np.exp(-(r**2))

    vals = bump(c)
    if spec.family == "signed_pair":
        shift = c.copy()
        shift[0] += spec.offset
        vals = vals - spec.neg_ratio * bump(shift)
    return Field(grid, spec.amplitude * vals)


@dataclass(frozen=True)
class Params:
    """Problem data: order s, sublinear power q, perturbation eps and weight h."""

    s: float
    q: float
    eps: float
    h: Field = field(repr=False)

    def __post_init__(self):
        check_order(self.h.grid.dim, self.s)
        if not 0 < self.q < 1:
            raise ConfigurationError(f"q must lie in (0, 1), got {self.q}")
        if not self.eps > 0:
            raise ConfigurationError(f"eps must be positive, got {self.eps}")
        if not (np.isfinite(lp_norm(self.h, 1)) and np.isfinite(np.abs(self.h.values).max())):
            raise ConfigurationError("h must have finite L1 and Linf norms")
        object.__setattr__(self, "crit", critical_exponent(self.h.grid.dim, self.s))

    @property
    def grid(self) -> Grid:
        return self.h.grid

    @property
    def dim(self) -> int:
        return self.grid.dim

    def h_norm(self, p: float) -> float:
        return lp_norm(self.h, p)

    def holder_exponent(self) -> float:
        """r = p*/(p* - q - 1), the exponent paired with h by Hoelder."""
        return self.crit / (self.crit - self.q - 1)


def h1_ball(h: Field, h_min: float | None = None):
    """Largest grid ball on which ``h >= h_min`` (default 10% of max h).

    Returns ``(center, radius, inf_h)``.  The radius is the distance from the
    chosen node to the nearest node failing the bound (nodes outside the box
    count as failing, h being zero there), minus half a cell.
    """
    vals = h.values
    top = float(vals.max())
    if not top > 0:
        raise HypothesisH1Error("(h1) violated: h is nowhere positive")
    h_min = 0.1 * top if h_min is None else h_min
    if not h_min > 0:
        raise ConfigurationError("h_min must be positive")
    mask = np.pad(vals >= h_min, 1, constant_values=False)
    if not mask.any():
        raise HypothesisH1Error(f"(h1) violated: h < {h_min} everywhere")
    g = h.grid
    dist = ndimage.distance_transform_edt(mask, sampling=g.spacing)
    idx = np.unravel_index(np.argmax(dist), dist.shape)
    radius = float(dist[idx]) - 0.5 * g.spacing
    node = tuple(i - 1 for i in idx)
    center = np.array([g.axis[i] for i in node])
    inside = g.radius(center) <= radius
    if radius <= 0 or not inside.any():
        raise HypothesisH1Error("(h1) violated: no grid ball with h bounded below")
    return center, radius, float(vals[inside].min())


def _pos_pow(u, p):
    return np.power(np.maximum(u, 0.0), p)


def _shifted_diff(a, t, p):
    """(a + t)^p - a^p for a >= 0, t >= 0, without cancellation for t << a."""
    a, t = np.broadcast_arrays(np.asarray(a, float), np.asarray(t, float))
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        ratio = np.where(a > 0, t / np.where(a > 0, a, 1.0), np.inf)
        small = np.power(a, p) * np.expm1(p * np.log1p(np.minimum(ratio, 1.0)))
    # for t >= a the direct difference has no cancellation to speak of
    return np.where(ratio < 1.0, small, np.power(a + t, p) - np.power(a, p))


def _taylor_remainder(a, t, p, terms=14):
    """(a + t)^p - a^p - p a^(p-1) t for a >= 0, t >= 0."""
    a, t = np.broadcast_arrays(np.asarray(a, float), np.asarray(t, float))
    out = np.empty(a.shape)
    zero = a <= 0
    out[zero] = np.power(t[zero], p)
    pos = ~zero
    ap, tp = a[pos], t[pos]
    with np.errstate(over="ignore"):
        x = tp / ap  # inf for subnormal a lands in the direct branch
    small = x < 0.1
    res = np.empty(ap.shape)
    # binomial series, truncation error below 0.1^terms relative
    xs = x[small]
    acc = np.zeros(xs.shape)
    for k in range(terms, 1, -1):
        acc = (acc + binom(p, k)) * xs
    res[small] = np.power(ap[small], p) * acc * xs
    big = ~small
    ab, tb = ap[big], tp[big]
    res[big] = np.power(ab + tb, p) - np.power(ab, p) - p * np.power(ab, p - 1) * tb
    out[pos] = res
    return out


def _check_u_eps(u_eps):
    u = np.asarray(u_eps, float)
    if np.any(u < -NEG_SLACK):
        raise ValueError(f"u_eps must be nonnegative (min {u.min():.3e})")
    return np.maximum(u, 0.0)


def gtilde_Gtilde_point(params: Params, u_eps_val, t):
    """Sublinear part: g~ = (u+t_+)^q - u^q and its primitive G~ in t."""
    u = _check_u_eps(u_eps_val)
    tp = np.maximum(np.asarray(t, float), 0.0)
    q = params.q
    g = _shifted_diff(u, tp, q)
    big_g = _taylor_remainder(u, tp, q + 1) / (q + 1)
    return g, big_g


def gstar_Gstar_point(params: Params, u_eps_val, t):
    """Critical part: g* = (u+t_+)^(p*-1) - u^(p*-1) and G* in closed form."""
    u = _check_u_eps(u_eps_val)
    tp = np.maximum(np.asarray(t, float), 0.0)
    p = params.crit
    g = _shifted_diff(u, tp, p - 1)
    big_g = _taylor_remainder(u, tp, p) / p
    return g, big_g


def g_point(params: Params, u_eps_val, h_val, t):
    gt, _ = gtilde_Gtilde_point(params, u_eps_val, t)
    gs, _ = gstar_Gstar_point(params, u_eps_val, t)
    return params.eps * np.asarray(h_val, float) * gt + gs


def G_point(params: Params, u_eps_val, h_val, t):
    _, big_gt = gtilde_Gtilde_point(params, u_eps_val, t)
    _, big_gs = gstar_Gstar_point(params, u_eps_val, t)
    return params.eps * np.asarray(h_val, float) * big_gt + big_gs


# f_eps ---------------------------------------------------------------------


def _nonlinear_energy(params: Params, u: np.ndarray) -> np.ndarray:
    q, p = params.q, params.crit
    return params.eps / (q + 1) * params.h.values * _pos_pow(u, q + 1) + _pos_pow(u, p) / p


def _nonlinear_force(params: Params, u: np.ndarray) -> np.ndarray:
    return params.eps * params.h.values * _pos_pow(u, params.q) + _pos_pow(u, params.crit - 1)


def eval_f(params: Params, u: Field) -> float:
    check_same_grid(params.h, u)
    quad = 0.5 * gagliardo_seminorm_sq(u, params.s)
    return quad - params.grid.weight * float(np.sum(_nonlinear_energy(params, u.values)))


def pair_df(params: Params, u: Field, v: Field) -> float:
    check_same_grid(params.h, u)
    check_same_grid(u, v)
    lin = params.grid.weight * float(np.sum(_nonlinear_force(params, u.values) * v.values))
    return bilinear_form(u, v, params.s) - lin


def grad_f(params: Params, u: Field) -> Field:
    check_same_grid(params.h, u)
    au = frac_laplacian(u, params.s).values
    return u.with_values(au - _nonlinear_force(params, u.values))


def energy_and_grad_f(params: Params, u: Field):
    """``(eval_f(u), grad_f(u))`` sharing one operator application."""
    au = frac_laplacian(u, params.s).values
    w = params.grid.weight
    energy = 0.5 * w * float(np.sum(u.values * au)) - w * float(np.sum(_nonlinear_energy(params, u.values)))
    return energy, u.with_values(au - _nonlinear_force(params, u.values))


# I_eps ---------------------------------------------------------------------


def _u_eps_values(params: Params, u_eps: Field) -> np.ndarray:
    check_same_grid(params.h, u_eps)
    return _check_u_eps(u_eps.values)


def eval_I(params: Params, u_eps: Field, v: Field) -> float:
    check_same_grid(u_eps, v)
    ue = _u_eps_values(params, u_eps)
    big_g = G_point(params, ue, params.h.values, v.values)
    return 0.5 * gagliardo_seminorm_sq(v, params.s) - params.grid.weight * float(np.sum(big_g))


def eval_I_star(params: Params, u_eps: Field, v: Field) -> float:
    """The auxiliary functional with only the critical part of G."""
    check_same_grid(u_eps, v)
    ue = _u_eps_values(params, u_eps)
    _, big_gs = gstar_Gstar_point(params, ue, v.values)
    return 0.5 * gagliardo_seminorm_sq(v, params.s) - params.grid.weight * float(np.sum(big_gs))


def h_gtilde_integral(params: Params, u_eps: Field, v: Field) -> float:
    """``int h G~(x, v)``, the piece separating I_eps from I*_eps."""
    ue = _u_eps_values(params, u_eps)
    _, big_gt = gtilde_Gtilde_point(params, ue, v.values)
    return integrate(v.with_values(params.h.values * big_gt))


def pair_dI(params: Params, u_eps: Field, v: Field, w: Field) -> float:
    check_same_grid(u_eps, v)
    check_same_grid(v, w)
    ue = _u_eps_values(params, u_eps)
    g = g_point(params, ue, params.h.values, v.values)
    return bilinear_form(v, w, params.s) - params.grid.weight * float(np.sum(g * w.values))


def grad_I(params: Params, u_eps: Field, v: Field) -> Field:
    check_same_grid(u_eps, v)
    ue = _u_eps_values(params, u_eps)
    av = frac_laplacian(v, params.s).values
    return v.with_values(av - g_point(params, ue, params.h.values, v.values))


def energy_and_grad_I(params: Params, u_eps: Field, v: Field):
    ue = _u_eps_values(params, u_eps)
    av = frac_laplacian(v, params.s).values
    w = params.grid.weight
    hv = params.h.values
    energy = 0.5 * w * float(np.sum(v.values * av)) - w * float(np.sum(G_point(params, ue, hv, v.values)))
    return energy, v.with_values(av - g_point(params, ue, hv, v.values))


def l2_norm(u: Field) -> float:
    return lp_norm(u, 2)


def make_params(grid: Grid, s: float, q: float, eps: float, hspec: HSpec | None = None, h: Field | None = None) -> Params:
    if h is None:
        h = make_h(grid, hspec or HSpec(center=(0.0,) * grid.dim))
    return Params(s, q, eps, h)


def sample(grid: Grid, f) -> Field:
    return sample_field(grid, f)
