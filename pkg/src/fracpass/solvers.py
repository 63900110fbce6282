"""Local minimum, threshold constants and mountain-pass search.

Both solvers are preconditioned gradient methods: the search direction is
``-P^-1 grad`` with P the Fourier multiplier ``scale |k|^2s + sigma`` on a
zero-padded torus, an approximate inverse of the discrete operator.  Step
sizes come from a Barzilai-Borwein guess in the P-metric followed by Armijo
backtracking, so accepted iterates never increase the objective.

Stopping needs both ``residual < grad_tol`` and ``residual < rel_tol * ||A u||``:
the solutions for small eps have size eps^(1/(1-q)), and an absolute
tolerance alone is met by the initial guess.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.fft as sfft
from scipy.optimize import minimize_scalar

from .energies import (
    G_point,
    Params,
    energy_and_grad_f,
    energy_and_grad_I,
    gstar_Gstar_point,
    grad_f,
    grad_I,
    h1_ball,
)
from .errors import ConfigurationError, DegeneratePathError, HypothesisH1Error, PathResolutionError, ThresholdError
from .grid import Field, GridSpec, lp_norm
from .nonlocal_ops import frac_laplacian, gagliardo_seminorm_sq, get_threads, symbol_scale
from .profiles import BubbleSpec, CutoffSpec, cutoff, extrapolated_sobolev_constant, path_point

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolveOptions:
    max_iters: int = 2000
    grad_tol: float = 1e-5
    rel_tol: float = 1e-6
    step0: float = 1.0
    backtrack: float = 0.5
    armijo: float = 1e-4
    seed: int = 0
    path_nodes: int = 64
    nonneg_slack: float = 1e-8

    def __post_init__(self):
        if self.max_iters < 1:
            raise ConfigurationError("max_iters must be at least 1")
        if not self.grad_tol > 0 or not self.rel_tol > 0:
            raise ConfigurationError("tolerances must be positive")
        if not self.step0 > 0:
            raise ConfigurationError("step0 must be positive")
        if not 0 < self.backtrack < 1:
            raise ConfigurationError("backtrack factor must lie in (0, 1)")
        if not 0 < self.armijo < 1:
            raise ConfigurationError("sufficient-decrease coefficient must lie in (0, 1)")
        if not 32 <= self.path_nodes <= 128:
            raise ConfigurationError("path_nodes must lie in [32, 128]")


@dataclass
class SolveResult:
    u: Field = field(repr=False)
    energy: float
    seminorm: float
    residual: float
    iters: int
    converged: bool
    min_value: float
    relative_residual: float = float("nan")
    energy_trace: list = field(default_factory=list, repr=False)
    residual_trace: list = field(default_factory=list, repr=False)
    info: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ThresholdReport:
    S_hat: float
    r: float
    C_star: float
    level: float
    bound: float
    passed: bool
    C_star_grid: float = float("nan")
    eps: float = float("nan")

    @property
    def pass_(self) -> bool:
        return self.passed


# preconditioner ------------------------------------------------------------


class Preconditioner:
    """Approximate inverse of the discrete operator by a padded Fourier multiplier."""

    def __init__(self, spec: GridSpec, s: float, shift: float | None = None):
        self.spec = spec
        m = 2 * spec.points
        k = 2 * np.pi * sfft.fftfreq(m, d=spec.spacing)
        kr = 2 * np.pi * sfft.rfftfreq(m, d=spec.spacing)
        axes = [k] * (spec.dim - 1) + [kr]
        k2 = sum(a**2 for a in np.meshgrid(*axes, indexing="ij", sparse=True))
        scale = symbol_scale(spec.dim, s)
        if shift is None:
            # lowest box mode; keeps the multiplier invertible at k = 0
            shift = scale * (np.pi / spec.half_width) ** (2 * s)
        self._inv = 1.0 / (scale * k2**s + shift)
        self._shape = (m,) * spec.dim

    def __call__(self, g: np.ndarray) -> np.ndarray:
        gh = sfft.rfftn(g, s=self._shape, workers=get_threads())
        out = sfft.irfftn(gh * self._inv, s=self._shape, workers=get_threads())
        return out[(slice(0, self.spec.points),) * self.spec.dim]


@lru_cache(maxsize=16)
def preconditioner(spec: GridSpec, s: float) -> Preconditioner:
    return Preconditioner(spec, s)


# rho(eps) --------------------------------------------------------------------


def first_zero(eps: float, q: float, crit: float, c1: float, c2: float, rtol: float = 1e-10) -> float:
    """Smallest t > 0 where t^2/2 - eps c1 t^(q+1) - c2 t^crit turns positive.

    Dividing by t^(q+1) leaves psi(t) - eps c1 with psi(t) = t^(1-q)/2 - c2 t^(crit-q-1)
    unimodal, peaking at t_peak; the first zero is the root of the
    increasing branch on (0, t_peak], found by bisection.
    """
    if not (eps > 0 and c1 > 0 and c2 > 0):
        raise ConfigurationError("eps, c1 and c2 must be positive")
    if not (0 < q < 1 and crit > 2):
        raise ConfigurationError("need 0 < q < 1 and crit > 2")

    def psi(t):
        return 0.5 * t ** (1 - q) - c2 * t ** (crit - q - 1) - eps * c1

    t_peak = ((1 - q) / (2 * c2 * (crit - q - 1))) ** (1.0 / (crit - 2))
    if not psi(t_peak) > 0:
        raise ThresholdError(f"no positive zero of the radius function for eps={eps} (eps*c1 too large)")
    lo, hi = 0.0, t_peak
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if psi(mid) > 0:
            hi = mid
        else:
            lo = mid
    return hi


def rho_constants(params: Params, S_hat: float) -> tuple[float, float]:
    """c1 = ||h||_r S^-(q+1)/2 / (q+1) and c2 = S^-(p*/2) / p* (Hoelder + Sobolev)."""
    q, p = params.q, params.crit
    c1 = params.h_norm(params.holder_exponent()) * S_hat ** (-(q + 1) / 2) / (q + 1)
    c2 = S_hat ** (-p / 2) / p
    return c1, c2


def rho_of_eps(params: Params, c1: float, c2: float) -> float:
    return first_zero(params.eps, params.q, params.crit, c1, c2)


_DEFAULT_EXTRAP = {1: ((64.0, 256.0, 1024.0), 8), 2: ((8.0, 16.0, 32.0), 8), 3: ((4.0, 8.0, 16.0), 4)}


@lru_cache(maxsize=None)
def default_sobolev_constant(dim: int, s: float) -> float:
    widths, ppu = _DEFAULT_EXTRAP[dim]
    return extrapolated_sobolev_constant(dim, s, widths, ppu).S_hat


# descent core ------------------------------------------------------------------


def _descend(energy_grad, u0: Field, opts: SolveOptions, project=None, scale_fn=None, label="descent"):
    """Preconditioned projected descent with BB steps and Armijo backtracking."""
    grid = u0.grid
    P = preconditioner(grid.spec, energy_grad.s)
    w = grid.weight
    u = u0 if project is None else project(u0)
    E, G = energy_grad(u)
    e_trace, r_trace = [E], []
    alpha, prev = opts.step0, None
    converged, it, stalled = False, 0, False
    for it in range(1, opts.max_iters + 1):
        res = lp_norm(G, 2)
        scale = scale_fn(u)
        r_trace.append(res)
        if res < opts.grad_tol and res <= opts.rel_tol * scale:
            converged = True
            it -= 1
            break
        d = -P(G.values)
        if prev is not None:
            du, dg = u.values - prev[0], G.values - prev[1]
            pdg = P(dg)
            den = float(np.sum(dg * pdg))
            if den > 0:
                alpha = float(np.sum(du * dg)) / den
        a = alpha if alpha > 0 else opts.step0
        slope = w * float(np.sum(G.values * d))
        if slope >= 0:
            stalled = True
            break
        for _ in range(60):
            trial = u.with_values(u.values + a * d)
            if project is not None:
                trial = project(trial)
            Et, Gt = energy_grad(trial)
            if Et <= E + opts.armijo * a * slope:
                break
            a *= opts.backtrack
        else:
            stalled = True
            break
        if Et > E:
            stalled = True
            break
        prev = (u.values, G.values)
        u, E, G = trial, Et, Gt
        e_trace.append(E)
    else:
        res = lp_norm(G, 2)
        scale = scale_fn(u)
        converged = res < opts.grad_tol and res <= opts.rel_tol * scale
    res = lp_norm(G, 2)
    scale = scale_fn(u)
    if stalled:
        # round-off floor: accept if the tolerances hold anyway
        converged = res < opts.grad_tol and res <= opts.rel_tol * scale
        log.debug("%s stalled at iteration %d, residual %.3e", label, it, res)
    return u, E, G, it, converged, e_trace, r_trace, res, scale


class _FEnergy:
    def __init__(self, params):
        self.params, self.s = params, params.s

    def __call__(self, u):
        return energy_and_grad_f(self.params, u)


class _IEnergy:
    def __init__(self, params, u_eps):
        self.params, self.u_eps, self.s = params, u_eps, params.s

    def __call__(self, v):
        return energy_and_grad_I(self.params, self.u_eps, v)


def _operator_scale(s):
    return lambda u: lp_norm(frac_laplacian(u, s), 2)


# local minimum -------------------------------------------------------------------


def initial_guess(params: Params, rho: float) -> Field:
    """t0 * phi_B with phi_B a cutoff on the (h1) ball and f(t0 phi_B) < 0, [t0 phi_B] <= rho."""
    center, radius, _ = h1_ball(params.h)
    phi = cutoff(params.grid, CutoffSpec(radius, tuple(center)))
    w = params.grid.weight
    q, p = params.q, params.crit
    sem = gagliardo_seminorm_sq(phi, params.s)
    a1 = params.eps / (q + 1) * w * float(np.sum(params.h.values * phi.values ** (q + 1)))
    a2 = w * float(np.sum(phi.values**p)) / p
    if a1 <= 0:
        raise HypothesisH1Error("(h1) violated: h has no positive mass on its ball")
    t_hi = rho / np.sqrt(sem)
    ts = t_hi * np.geomspace(1e-8, 1.0, 400)
    vals = 0.5 * ts**2 * sem - a1 * ts ** (q + 1) - a2 * ts**p
    k = int(np.argmin(vals))
    if not vals[k] < 0:
        raise HypothesisH1Error("(h1)-type failure: no t0 with negative energy inside the ball")
    return phi * ts[k]


def solve_local_min(params: Params, opts: SolveOptions | None = None, S_hat: float | None = None) -> SolveResult:
    """Nonnegative local minimiser of f_eps inside the ball [u]_s <= rho(eps)."""
    opts = opts or SolveOptions()
    h1_ball(params.h)  # raises HypothesisH1Error early
    S = default_sobolev_constant(params.dim, params.s) if S_hat is None else S_hat
    c1, c2 = rho_constants(params, S)
    rho = rho_of_eps(params, c1, c2)
    s = params.s

    def project(u):
        nrm = np.sqrt(gagliardo_seminorm_sq(u, s))
        if nrm > rho:
            return u * (rho / nrm)
        return u

    u0 = initial_guess(params, rho)
    u, E, G, it, conv, et, rt, res, scale = _descend(
        _FEnergy(params), u0, opts, project, _operator_scale(s), "solve_local_min"
    )
    sem = float(np.sqrt(gagliardo_seminorm_sq(u, s)))
    info = {"rho": rho, "c1": c1, "c2": c2, "S_hat": S, "on_sphere": bool(sem >= rho * (1 - 1e-9))}
    return SolveResult(u, E, sem, res, it, conv, u.min(), res / scale if scale > 0 else float("nan"), et, rt, info)


# threshold ------------------------------------------------------------------------


def c_star(alpha: float, beta: float, q: float, crit: float) -> tuple[float, float]:
    """sup_{x>0} beta x^(q+1) - alpha x^crit and its maximiser."""
    x = (beta * (q + 1) / (alpha * crit)) ** (1.0 / (crit - q - 1))
    return beta * x ** (q + 1) - alpha * x**crit, x


def c_star_grid(alpha: float, beta: float, q: float, crit: float, n: int = 20001) -> float:
    """Grid-search oracle for :func:`c_star` (log grid, then local refinement).

    The log grid widens while its argmax sits on an end node.
    """
    lo_exp, hi_exp = -6.0, 6.0
    for _ in range(20):
        xs = np.geomspace(10.0**lo_exp, 10.0**hi_exp, n)
        vals = beta * xs ** (q + 1) - alpha * xs**crit
        k = int(np.argmax(vals))
        if 0 < k < n - 1:
            break
        lo_exp, hi_exp = (lo_exp - 6.0, hi_exp) if k == 0 else (lo_exp, hi_exp + 6.0)
    lo, hi = xs[max(k - 1, 0)], xs[min(k + 1, n - 1)]
    fine = np.linspace(lo, hi, n)
    return float(np.max(beta * fine ** (q + 1) - alpha * fine**crit))


def threshold_C_star(params: Params, norm_h_r: float, S_hat: float | None = None, level: float = float("nan")) -> ThresholdReport:
    q, p, n, s = params.q, params.crit, params.dim, params.s
    r = p / (p - q - 1)
    alpha = s / n
    beta = (1.0 / (q + 1) - 0.5) * norm_h_r
    cs, _ = c_star(alpha, beta, q, p)
    S = default_sobolev_constant(n, s) if S_hat is None else S_hat
    bound = s / n * S ** (n / (2 * s)) - cs * params.eps**r
    passed = bool(np.isfinite(level) and level < bound)
    return ThresholdReport(S, r, cs, level, bound, passed, c_star_grid(alpha, beta, q, p), params.eps)


# mountain-pass path ---------------------------------------------------------------


@dataclass
class PathSup:
    sup_I: float
    t_I: float
    sup_Istar: float
    t_Istar: float
    T1: float
    ts: np.ndarray = field(repr=False)
    I_values: np.ndarray = field(repr=False)
    Istar_values: np.ndarray = field(repr=False)

    def __iter__(self):
        return iter((self.sup_I, self.t_I))

    @property
    def max_gap(self) -> float:
        """max_t (I - I*) along the path; <= 0 when I <= I*."""
        return float(np.max(self.I_values - self.Istar_values))


class _Ray:
    """I and I* along t -> t w with [w]^2 precomputed."""

    def __init__(self, params: Params, u_eps: Field, w: Field, sem_w: float | None = None):
        self.params = params
        self.ue = np.maximum(u_eps.values, 0.0)
        self.w = w
        self.sem = gagliardo_seminorm_sq(w, params.s) if sem_w is None else sem_w
        self.weight = params.grid.weight

    def I(self, t):
        v = t * self.w.values
        return 0.5 * t * t * self.sem - self.weight * float(np.sum(G_point(self.params, self.ue, self.params.h.values, v)))

    def Istar(self, t):
        v = t * self.w.values
        return 0.5 * t * t * self.sem - self.weight * float(np.sum(gstar_Gstar_point(self.params, self.ue, v)[1]))

    def end(self, start=1.0):
        """T with I(T w) <= 0 and I*(T w) <= 0, by doubling."""
        t = start
        for _ in range(200):
            if self.I(t) <= 0 and self.Istar(t) <= 0 and t > 0:
                return t
            t *= 2.0
        raise PathResolutionError("path energy stays positive; cannot place the endpoint")

    def maximise(self, f, ts, vals):
        k = int(np.argmax(vals))
        if k == len(ts) - 1:
            return None
        lo, hi = ts[max(k - 1, 0)], ts[k + 1]
        out = minimize_scalar(lambda t: -f(t), bounds=(lo, hi), method="bounded", options={"xatol": 1e-12 * hi})
        best = -out.fun
        if best < vals[k]:
            return float(vals[k]), float(ts[k])
        return float(best), float(out.x)


def mp_path_sup(params: Params, u_eps: Field, spec: BubbleSpec, cut: CutoffSpec, t_max: float | None = None, t_steps: int = 256, retries: int = 4) -> PathSup:
    """sup over t of I_eps and I*_eps along t phi z_{mu,xi}."""
    w = path_point(params.grid, 1.0, spec, cut, params.s)
    ray = _Ray(params, u_eps, w)
    T = ray.end() if t_max is None else t_max
    for _ in range(retries + 1):
        ts = np.linspace(0.0, T, t_steps + 1)
        iv = np.array([ray.I(t) for t in ts])
        sv = np.array([ray.Istar(t) for t in ts])
        a = ray.maximise(ray.I, ts, iv)
        b = ray.maximise(ray.Istar, ts, sv)
        if a is not None and b is not None:
            return PathSup(a[0], a[1], b[0], b[1], T, ts, iv, sv)
        T *= 2.0
    raise PathResolutionError(f"path maximum stays at the end of the t-grid (T={T})")


# mountain pass ----------------------------------------------------------------------


def _ray_max(ray: _Ray, n: int):
    T = ray.end()
    ts = np.linspace(0.0, T, n)
    vals = np.array([ray.I(t) for t in ts])
    out = ray.maximise(ray.I, ts, vals)
    if out is None:
        raise PathResolutionError("ray maximum at the path end")
    return out


def solve_mountain_pass(
    params: Params,
    u_eps: Field,
    opts: SolveOptions | None = None,
    spec: BubbleSpec | None = None,
    cut: CutoffSpec | None = None,
    start: Field | None = None,
) -> SolveResult:
    """Mountain-pass critical point v of I_eps by path deformation.

    The path is the ray {t w : 0 <= t <= T} from 0 to an endpoint of negative
    energy.  Each iteration descends its maximal node v = t* w along
    -P^-1 grad I(v), then re-interpolates the path as the ray through the
    moved node.  The new path is accepted only if its maximum is lower
    (monotone safeguard); otherwise the step is halved.  A fixed point has
    grad I(v) = 0.
    """
    opts = opts or SolveOptions()
    s, grid = params.s, params.grid
    if start is None:
        if spec is None or cut is None:
            raise ConfigurationError("need a bubble and cutoff (or a start direction) for the initial path")
        start = path_point(grid, 1.0, spec, cut, s)
    P = preconditioner(grid.spec, s)
    wgt = grid.weight
    ray = _Ray(params, u_eps, start)
    E, t = _ray_max(ray, opts.path_nodes)
    v = ray.w * t
    _, G = energy_and_grad_I(params, u_eps, v)
    scale_fn = _operator_scale(s)
    e_trace, r_trace = [E], []
    alpha, prev = opts.step0, None
    converged, it = False, 0
    for it in range(1, opts.max_iters + 1):
        res = lp_norm(G, 2)
        r_trace.append(res)
        if E < 1e-14 * max(1.0, abs(e_trace[0])) or np.sqrt(gagliardo_seminorm_sq(v, s)) < 1e-10:
            raise DegeneratePathError("mountain-pass path collapsed to 0; try a different bubble scale mu")
        if res < opts.grad_tol and res <= opts.rel_tol * scale_fn(v):
            converged = True
            it -= 1
            break
        d = -P(G.values)
        if prev is not None:
            du, dg = v.values - prev[0], G.values - prev[1]
            pdg = P(dg)
            den = float(np.sum(dg * pdg))
            if den > 0:
                alpha = float(np.sum(du * dg)) / den
        a = alpha if alpha > 0 else opts.step0
        slope = wgt * float(np.sum(G.values * d))
        accepted = False
        for _ in range(60):
            moved = v.with_values(v.values + a * d)
            nray = _Ray(params, u_eps, moved)
            try:
                En, tn = _ray_max(nray, opts.path_nodes)
            except PathResolutionError:
                a *= opts.backtrack
                continue
            if En <= E + opts.armijo * a * slope:
                accepted = True
                break
            a *= opts.backtrack
        if not accepted:
            break
        prev = (v.values, G.values)
        ray, E = nray, En
        v = moved * tn
        _, G = energy_and_grad_I(params, u_eps, v)
        e_trace.append(E)
    res = lp_norm(G, 2)
    scale = scale_fn(v)
    if not converged:
        converged = res < opts.grad_tol and res <= opts.rel_tol * scale
    sem = float(np.sqrt(gagliardo_seminorm_sq(v, s)))
    u_tilde = u_eps + v
    res_tilde = lp_norm(grad_f(params, u_tilde), 2)
    info = {"u_tilde": u_tilde, "residual_f": res_tilde, "min_u_tilde": u_tilde.min()}
    return SolveResult(v, E, sem, res, it, converged, v.min(), res / scale if scale > 0 else float("nan"), e_trace, r_trace, info)


def pde_residual(params: Params, u: Field) -> float:
    """L^2 norm of the f_eps gradient, the discrete residual of the equation."""
    return lp_norm(grad_f(params, u), 2)


def threshold_report_for(params: Params, level: float, S_hat: float | None = None) -> ThresholdReport:
    return threshold_C_star(params, params.h_norm(params.holder_exponent()), S_hat, level)


def mp_residual_I(params: Params, u_eps: Field, v: Field) -> float:
    return lp_norm(grad_I(params, u_eps, v), 2)


def threshold_inequality_check(params: Params, norm_h_r: float, n: int = 10_000, seed: int = 0):
    """Sample (s/N) a^p* - eps beta a^(q+1) >= -C* eps^r on random (a, eps).

    Returns ``(violations, worst_margin)``; margins are divided by the sum of
    the magnitudes of the three terms.
    """
    q, p, N, s = params.q, params.crit, params.dim, params.s
    r = p / (p - q - 1)
    alpha, beta = s / N, (1.0 / (q + 1) - 0.5) * norm_h_r
    cs, x_star = c_star(alpha, beta, q, p)
    rng = np.random.default_rng(seed)
    eps = np.exp(rng.uniform(np.log(1e-4), 0.0, n))
    a = np.exp(rng.uniform(np.log(1e-4), np.log(1e2), n))
    # include the extremal points a = x* eps^(1/(p-q-1)) where equality holds
    a[: n // 100] = x_star * eps[: n // 100] ** (1.0 / (p - q - 1))
    t1, t2, t3 = alpha * a**p, eps * beta * a ** (q + 1), cs * eps**r
    margin = (t1 - t2 + t3) / (t1 + t2 + t3)
    return int(np.sum(margin < -1e-12)), float(margin.min())
