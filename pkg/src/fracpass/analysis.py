"""Property sweeps: power inequalities, cutoff estimates, concentration, and
the weighted extension ratio for the degenerate weight y^(1-2s).

Every inequality check derives its constant first from a deterministic
oracle (a fine grid refined by a scalar optimiser), then validates it on
random samples.  Margins are normalised by the natural scale of each
inequality so that the 1e-12 slack is meaningful for large a, b and p.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import ConfigurationError
from .grid import Field, Grid, integrate
from .nonlocal_ops import critical_exponent, ds_squared, gagliardo_seminorm_sq
from .profiles import BubbleSpec, CutoffSpec, _unit_bubble, cutoff, loglog_slope, smoothstep_profile

SLACK = 1e-12


@dataclass
class LemmaReport:
    lemma_id: str
    samples: int
    violations: int
    worst_margin: float
    derived_constant: float
    details: dict = field(default_factory=dict)


# power inequalities ----------------------------------------------------------


def _log_uniform_pairs(rng, n, lo=1e-3, hi=100.0):
    a = np.exp(rng.uniform(np.log(lo), np.log(hi), n))
    b = np.exp(rng.uniform(np.log(lo), np.log(hi), n))
    # boundary cases: zeros and equal values
    edge = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0], [hi, hi], [lo, lo], [hi, 0.0], [0.0, hi]])
    return np.concatenate([a, edge[:, 0]]), np.concatenate([b, edge[:, 1]])


def _excess_ratio(t, p):
    """((1+t)^p - 1 - t^p) / t, without cancellation at either end."""
    t = np.asarray(t, float)
    small = t <= 1
    ts, tl = np.where(small, t, 1.0), np.where(small, 1.0, t)
    lo = (np.expm1(p * np.log1p(ts)) - ts**p) / ts
    # t^(p-1) ((1 + 1/t)^p - 1 - t^-p)
    hi = tl ** (p - 1) * (np.expm1(p * np.log1p(1 / tl)) - tl ** (-p))
    return np.where(small, lo, hi)


def _grid_inf(f, lo, hi, n=20001):
    """Infimum of a smooth scalar function on [lo, hi]: log grid plus refinement."""
    ts = np.geomspace(lo, hi, n)
    vals = f(ts)
    k = int(np.argmin(vals))
    best = float(vals[k])
    if 0 < k < n - 1:
        out = minimize_scalar(lambda x: float(f(np.array([x]))[0]), bounds=(ts[k - 1], ts[k + 1]), method="bounded", options={"xatol": 1e-14})
        best = min(best, float(out.fun))
    return best


def superadditivity_report(p: float, a, b) -> LemmaReport:
    """(a+b)^p >= a^p + b^p, strict when a, b > 0."""
    if not p > 1:
        raise ConfigurationError(f"superadditivity needs p > 1, got {p}")
    top = (a + b) ** p
    scale = np.where(top > 0, top, 1.0)
    margin = (top - a**p - b**p) / scale
    strict = (a > 0) & (b > 0)
    bad = (margin < -SLACK) | (strict & (margin <= 0))
    return LemmaReport(f"superadditivity[p={p:g}]", a.size, int(bad.sum()), float(margin.min()), float("nan"))


def linear_term_constant(p: float, k: float | None = None) -> float:
    """Largest c with (a+b)^p >= a^p + b^p + c a^(p-1) b (for b/a <= k if given)."""
    lo = 1e-12
    if k is None:
        return min(p, _grid_inf(lambda t: _excess_ratio(t, p), lo, 1e8))
    return min(p, _grid_inf(lambda t: _excess_ratio(t, p), lo, k))


def linear_term_report(p: float, a, b, k: float | None = None) -> LemmaReport:
    if k is None and not p >= 2:
        raise ConfigurationError(f"the unrestricted linear-term bound needs p >= 2, got {p}")
    if k is not None and not (1 < p < 2 and k > 0):
        raise ConfigurationError(f"the bounded-ratio bound needs p in (1, 2) and k > 0, got p={p}, k={k}")
    c = linear_term_constant(p, k)
    if k is not None:
        keep = (a > 0) & (b <= k * a)
        a, b = a[keep], b[keep]
    top = (a + b) ** p
    scale = np.where(top > 0, top, 1.0)
    margin = (top - a**p - b**p - c * a ** (p - 1) * b) / scale
    name = f"superadditivity_linear[p={p:g}]" if k is None else f"superadditivity_linear_bounded[p={p:g},k={k:g}]"
    return LemmaReport(name, a.size, int((margin < -SLACK).sum()), float(margin.min()), c)


def power_holder_constant(q: float) -> float:
    """L = sup_{t >= -1} |(1+t)^q - 1| / |t|^q, by grid search over both branches."""
    if not 0 < q < 1:
        raise ConfigurationError(f"q must lie in (0, 1), got {q}")
    u = np.geomspace(1e-12, 1.0, 20001)
    neg = np.abs((1 - u) ** q - 1) / u**q  # t = -u in [-1, 0)
    t = np.geomspace(1e-12, 1e12, 40001)
    pos = np.expm1(q * np.log1p(t)) / t**q
    return float(max(neg.max(), pos.max()))


def power_holder_report(q: float, a, b) -> LemmaReport:
    L = power_holder_constant(q)
    top = np.maximum(a, b) ** q
    scale = np.where(top > 0, top, 1.0)
    margin = (L * np.abs(a - b) ** q - np.abs(a**q - b**q)) / scale
    return LemmaReport(f"power_holder[q={q:g}]", a.size, int((margin < -SLACK).sum()), float(margin.min()), L)


def check_power_inequalities(
    p_samples=(1.5, 2.0, 3.0, 4.0, 8.0),
    ab_samples: int = 100_000,
    k_samples=(0.5, 1.0, 4.0),
    q_samples=(0.25, 0.5, 0.75),
    seed: int = 0,
) -> list[LemmaReport]:
    """Derive the constants, then test each inequality on ``ab_samples`` random pairs.

    ``p_samples`` feeds the superadditivity check (all p), the unrestricted
    linear-term check (p >= 2) and the bounded-ratio check (1 < p < 2, each k).
    """
    if ab_samples < 1:
        raise ConfigurationError("ab_samples must be positive")
    p_samples = list(p_samples)
    if not p_samples or min(p_samples) <= 1:
        raise ConfigurationError("p samples must be nonempty and > 1")
    if any(k <= 0 for k in k_samples):
        raise ConfigurationError("k samples must be positive")
    rng = np.random.default_rng(seed)
    out = []
    for p in p_samples:
        a, b = _log_uniform_pairs(rng, ab_samples)
        out.append(superadditivity_report(p, a, b))
        if p >= 2:
            out.append(linear_term_report(p, a, b))
        else:
            for k in k_samples:
                ak = np.exp(rng.uniform(np.log(1e-3), np.log(100.0), ab_samples))
                tk = np.concatenate([rng.uniform(0.0, k, ab_samples - 2), [0.0, k]])
                out.append(linear_term_report(p, ak, ak * tk, k))
    for q in q_samples:
        a, b = _log_uniform_pairs(rng, ab_samples)
        out.append(power_holder_report(q, a, b))
    return out


# cutoff estimates ----------------------------------------------------------------


def cutoff_bound_shape(grid: Grid, r: float, x0, s: float) -> np.ndarray:
    """min{r^-2s, r^N |x - x0|^-(N+2s)}."""
    d = grid.radius(np.asarray(x0, float))
    with np.errstate(divide="ignore"):
        far = r**grid.dim * d ** (-(grid.dim + 2 * s))
    return np.minimum(r ** (-2 * s), far)


def fit_cutoff_constant(grid: Grid, s: float, r: float, x0=None) -> float:
    """Smallest C with |D^s phi_{r,x0}|^2 <= C min{...} at every node."""
    x0 = tuple(np.zeros(grid.dim)) if x0 is None else tuple(x0)
    ds = ds_squared(cutoff(grid, CutoffSpec(r, x0)), s).values
    return float(np.max(ds / cutoff_bound_shape(grid, r, x0, s)))


def check_cutoff_bounds(grid: Grid, s: float, radii=(0.5, 1.0, 2.0), centers=None) -> LemmaReport:
    """Fit C per radius and centre; violations count pairs with ratio outside [1/2, 2]."""
    centers = [tuple(np.zeros(grid.dim))] if centers is None else [tuple(c) for c in centers]
    for r in radii:
        for c in centers:
            if np.linalg.norm(c) + r >= grid.half_width:
                raise ConfigurationError(f"cutoff radius {r} at {c} leaves the box")
    consts = {(r, c): fit_cutoff_constant(grid, s, r, c) for r in radii for c in centers}
    vals = np.array(list(consts.values()))
    ratios = vals[:, None] / vals[None, :]
    bad = int(np.sum(np.triu((ratios > 2) | (ratios < 0.5), 1)))
    worst = float(np.log(2) - np.max(np.abs(np.log(ratios))))
    details = {"constants": {f"r={r:g},x0={list(c)}": v for (r, c), v in consts.items()}, "max_ratio": float(ratios.max())}
    return LemmaReport("cutoff_decay", len(vals), bad, worst, float(vals.max()), details)


@dataclass
class VanishingReport:
    radii: tuple
    values: tuple
    monotone: bool
    ratio: float  # last value over first


def localized_energy(u: Field, phi: Field, s: float) -> float:
    """int |u|^2 |D^s phi|^2."""
    return integrate(u.with_values(u.values**2 * ds_squared(phi, s).values))


def dyadic_vanishing_small(u: Field, s: float, x0=None, deltas=(1.0, 0.5, 0.25, 0.125, 0.0625)) -> VanishingReport:
    """D(delta) = int |u|^2 |D^s phi_{delta,x0}|^2 over a shrinking dyadic family."""
    x0 = tuple(np.zeros(u.grid.dim)) if x0 is None else tuple(x0)
    vals = [localized_energy(u, cutoff(u.grid, CutoffSpec(d, x0)), s) for d in deltas]
    mono = all(b < a for a, b in zip(vals, vals[1:]))
    return VanishingReport(tuple(deltas), tuple(vals), mono, vals[-1] / vals[0])


def dyadic_vanishing_large(u: Field, s: float, radii=None) -> VanishingReport:
    """Same with 1 - phi_{R,0}; |D^s(1 - phi)|^2 = |D^s phi|^2 pointwise.

    Zero extension would add a spurious jump at the box edge to the field
    1 - phi_{R,0} itself, so the identity is used instead.
    """
    L = u.grid.half_width
    radii = (L / 8, L / 4, L / 2) if radii is None else tuple(radii)
    vals = [localized_energy(u, cutoff(u.grid, CutoffSpec(R, tuple(np.zeros(u.grid.dim)))), s) for R in radii]
    mono = all(b < a for a, b in zip(vals, vals[1:]))
    return VanishingReport(tuple(radii), tuple(vals), mono, vals[-1] / vals[0])


# concentration -------------------------------------------------------------------


@dataclass
class ConcentrationReport:
    kind: str
    description: str
    delta: float
    terms: list
    warnings: list = field(default_factory=list)

    @property
    def ball_fractions(self) -> list:
        return [t["ball_fraction"] for t in self.terms]

    @property
    def worst_relation_ratio(self) -> float:
        return max(t["relation_ratio"] for t in self.terms)


def _relation(S_hat, mu_hat, nu_hat, p):
    lhs = np.sqrt(S_hat) * nu_hat ** (1.0 / p)
    rhs = np.sqrt(mu_hat)
    return lhs, rhs


def concentration_diagnostics(
    grid: Grid,
    s: float,
    S_hat: float,
    c_ns: float,
    kind: str = "bubbling",
    n_max: int = 4,
    delta: float = 0.1,
    ball_radius: float = 0.5,
) -> ConcentrationReport:
    """Finite-sequence proxies for atoms and mass at infinity.

    bubbling: u_n = z_{2^-n, 0}.  Per term:
      ball mass  int_{B_delta} u_n^p*             (atom proxy, nu_i)
      nu_hat     int |phi_delta u_n|^p*           (localised critical mass)
      mu_hat     [phi_delta u_n]_s^2              (localised energy)
      relation   sqrt(S) nu_hat^(1/p*) <= mu_hat^(1/2)
    The same relation for the whole bubble (phi = 1) is recorded as
    ``whole_ratio``; equality there is the extremality of the bubble.

    escaping: u_n = z_{1, xi_n} with xi_n marching along the first axis to
    the box edge; per term the mass in the fixed ball B_{ball_radius}(0), the
    in-box total and the mass outside B_{L/4}(0) as the far-field proxy.
    """
    p = critical_exponent(grid.dim, s)
    terms, notes = [], []
    L = grid.half_width
    if kind == "bubbling":
        center = tuple(np.zeros(grid.dim))
        phi = cutoff(grid, CutoffSpec(delta, center)).values
        ball = grid.radius() <= delta
        for n in range(n_max + 1):
            mu = 2.0**-n
            u = Field(grid, c_ns * _unit_bubble(grid, s, mu, center))
            total = integrate(u.with_values(u.values**p))
            ball_mass = grid.weight * float(np.sum(u.values[ball] ** p))
            pu = u * phi
            nu_hat = integrate(pu.with_values(pu.values**p))
            mu_hat = gagliardo_seminorm_sq(pu, s)
            lhs, rhs = _relation(S_hat, mu_hat, nu_hat, p)
            wl, wr = _relation(S_hat, gagliardo_seminorm_sq(u, s), total, p)
            terms.append(
                {
                    "n": n,
                    "mu": mu,
                    "total": total,
                    "ball_mass": ball_mass,
                    "ball_fraction": ball_mass / total,
                    "mu_hat": mu_hat,
                    "nu_hat": nu_hat,
                    "relation_ratio": lhs / rhs,
                    "relation_margin": 1.05 * rhs - lhs,
                    "whole_ratio": wl / wr,
                }
            )
            if mu < 2 * grid.spacing:
                notes.append(f"n={n}: bubble scale {mu:g} below two grid spacings")
        desc = f"bubbles z_(2^-n, 0), n = 0..{n_max}, delta = {delta}"
    elif kind == "escaping":
        ball = grid.radius() <= ball_radius
        far = grid.radius() > L / 4
        centers = np.linspace(0.0, L, n_max + 1)
        for n, c in enumerate(centers):
            xi = np.zeros(grid.dim)
            xi[0] = c
            u = Field(grid, c_ns * _unit_bubble(grid, s, 1.0, xi))
            up = u.values**p
            total = grid.weight * float(np.sum(up))
            ball_mass = grid.weight * float(np.sum(up[ball]))
            if c + 4.0 >= L:
                notes.append(f"n={n}: centre {c:g} within 4 scales of the box edge, in-box mass truncated")
            terms.append(
                {
                    "n": n,
                    "center": float(c),
                    "total": total,
                    "ball_mass": ball_mass,
                    "ball_fraction": ball_mass / total,
                    "far_field_mass": grid.weight * float(np.sum(up[far])),
                    "relation_ratio": float("nan"),
                }
            )
        desc = f"bubbles z_(1, xi_n), xi_n from 0 to L along axis 0, fixed ball radius {ball_radius}"
    else:
        raise ConfigurationError(f"unknown concentration kind {kind!r}")
    for msg in notes:
        warnings.warn(msg, stacklevel=2)
    return ConcentrationReport(kind, desc, delta, terms, notes)


# weighted extension ratio ------------------------------------------------------------


def extension_gamma(N: int, s: float) -> float:
    return 1.0 + 2.0 / (N - 2 * s)


def predicted_extension_slope(N: int, s: float) -> float:
    """(1-2s)/2 * (1/gamma - 1)."""
    return (1 - 2 * s) / 2 * (1 / extension_gamma(N, s) - 1)


def _bump_and_gradient(rho):
    """Radial smoothstep bump of radius 1 and |d/drho|."""
    t = np.clip(2.0 * rho - 1.0, 0.0, 1.0)
    val = smoothstep_profile(rho)
    dval = 2.0 * 30.0 * t**2 * (1.0 - t) ** 2
    return val, dval


def appendix_ratio(s: float, N: int, R: float, resolution: int = 64) -> float:
    """Q(R) for the bump U(x, y) = Phi(x, y - R) in the upper half space.

    Q = (int y^(1-2s) |U|^(2 gamma))^(1/(2 gamma)) / (int y^(1-2s) |grad U|^2)^(1/2),
    midpoint rule on [-1,1]^N x [R-1, R+1] with ``resolution`` points per axis.
    """
    if not 0 < s < 1:
        raise ConfigurationError(f"s must lie in (0, 1), got {s}")
    if not N > 2 * s:
        raise ConfigurationError(f"need N > 2s, got N={N}, s={s}")
    if not R > 1:
        raise ValueError(f"R must exceed 1 so the bump stays off the boundary, got {R}")
    gam = extension_gamma(N, s)
    h = 2.0 / resolution
    ax = -1.0 + (np.arange(resolution) + 0.5) * h
    coords = np.meshgrid(*([ax] * (N + 1)), indexing="ij", sparse=True)
    rho = np.sqrt(sum(c**2 for c in coords))
    y = R + coords[-1]
    wgt = y ** (1 - 2 * s)
    val, dval = _bump_and_gradient(rho)
    vol = h ** (N + 1)
    num = vol * np.sum(wgt * val ** (2 * gam))
    den = vol * np.sum(wgt * dval**2)
    return float(num ** (1 / (2 * gam)) / np.sqrt(den))


def appendix_rate_fit(s: float, N: int, R_list, resolution: int = 64) -> float:
    """Least-squares slope of log Q against log R over a geometric R list."""
    R = np.asarray(R_list, float)
    if R.size < 3:
        raise ConfigurationError("need at least three R values")
    ratios = R[1:] / R[:-1]
    if np.any(ratios <= 1) or not np.allclose(ratios, ratios[0], rtol=1e-9):
        raise ConfigurationError("R values must form an increasing geometric sequence")
    Q = [appendix_ratio(s, N, r, resolution) for r in R]
    return loglog_slope(R, Q)
