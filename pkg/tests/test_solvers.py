import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracpass.energies import HSpec, eval_f, eval_I, eval_I_star, make_params
from fracpass.errors import ConfigurationError, DegeneratePathError, ThresholdError
from fracpass.grid import Field, make_grid
from fracpass.nonlocal_ops import frac_laplacian
from fracpass.profiles import BubbleSpec, CutoffSpec, path_point
from fracpass.solvers import (
    SolveOptions,
    c_star,
    c_star_grid,
    first_zero,
    mp_path_sup,
    pde_residual,
    preconditioner,
    rho_constants,
    solve_local_min,
    solve_mountain_pass,
    threshold_C_star,
    threshold_inequality_check,
)

S_1D = 8.4954  # extrapolated desk value for N=1, s=1/4


@pytest.fixture(scope="module")
def params_small(grid1d):
    return make_params(grid1d, 0.25, 0.5, 1e-2, HSpec(width=2.0))


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-4, 1.0), st.floats(0.1, 0.9), st.floats(0.05, 2.0), st.floats(1e-3, 0.2))
def test_first_zero_is_first(eps, q, c1, c2):
    p = 4.0
    phi = lambda t: 0.5 * t * t - eps * c1 * t ** (q + 1) - c2 * t**p
    try:
        rho = first_zero(eps, q, p, c1, c2)
    except ThresholdError:
        # no zero: phi stays <= 0 up to the cap
        ts = np.geomspace(1e-12, 1e3, 20000)
        assert np.all(phi(ts) <= 1e-12 * ts**2)
        return
    assert abs(phi(rho)) <= 1e-8 * rho**2
    ts = np.geomspace(min(1e-12, 1e-3 * rho), rho, 500)[:-1]
    assert np.all(phi(ts) <= 1e-12 * ts**2)


def test_first_zero_rejects_bad_input():
    with pytest.raises(ConfigurationError):
        first_zero(-1.0, 0.5, 4.0, 1.0, 1.0)
    with pytest.raises(ThresholdError):
        first_zero(1e6, 0.5, 4.0, 1.0, 1.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 1.0), st.floats(0.01, 5.0), st.floats(0.1, 0.9), st.floats(2.2, 6.0))
def test_c_star_closed_form_vs_grid(alpha, beta, q, p):
    cs, x = c_star(alpha, beta, q, p)
    assert cs > 0
    assert c_star_grid(alpha, beta, q, p) == pytest.approx(cs, rel=1e-6, abs=1e-9)


def test_threshold_report(params_small):
    norm = params_small.h_norm(params_small.holder_exponent())
    rep = threshold_C_star(params_small, norm, S_1D, level=1.0)
    assert rep.r == pytest.approx(4.0 / 2.5)
    assert rep.passed
    assert abs(rep.C_star - rep.C_star_grid) <= 1e-6
    viol, worst = threshold_inequality_check(params_small, norm)
    assert viol == 0 and worst > -1e-12


def test_preconditioner_symmetric_positive(grid1d):
    P = preconditioner(grid1d.spec, 0.25)
    rng = np.random.default_rng(0)
    g, b = rng.standard_normal(grid1d.shape), rng.standard_normal(grid1d.shape)
    assert float(np.sum(g * P(g))) > 0
    assert float(np.sum(b * P(g))) == pytest.approx(float(np.sum(g * P(b))), rel=1e-10)


def test_preconditioner_approximates_inverse(grid1d):
    # P A is close to a multiple of the identity on smooth fields: the
    # preconditioned field is nearly parallel to the input
    u = Field(grid1d, np.exp(-grid1d.axis**2))
    back = preconditioner(grid1d.spec, 0.25)(frac_laplacian(u, 0.25).values)
    cos = float(np.sum(back * u.values)) / (np.linalg.norm(back) * np.linalg.norm(u.values))
    assert cos > 0.95


def test_options_validation():
    with pytest.raises(ConfigurationError):
        SolveOptions(path_nodes=16)
    with pytest.raises(ConfigurationError):
        SolveOptions(backtrack=1.5)
    with pytest.raises(ConfigurationError):
        SolveOptions(grad_tol=0.0)


def test_local_min_small_eps(params_small):
    res = solve_local_min(params_small, SolveOptions(), S_1D)
    assert res.converged
    assert res.energy < 0
    assert res.seminorm <= res.info["rho"]
    assert res.residual < 1e-5
    assert res.min_value >= -1e-8
    assert res.energy == pytest.approx(eval_f(params_small, res.u), rel=1e-10)
    assert pde_residual(params_small, res.u) == pytest.approx(res.residual, rel=1e-10)
    # energies never increase along the descent
    assert np.all(np.diff(res.energy_trace) <= 1e-14 * abs(res.energy_trace[0]))


def test_rho_constants_positive(params_small):
    c1, c2 = rho_constants(params_small, S_1D)
    assert c1 > 0 and c2 == pytest.approx(S_1D**-2 / 4)


@pytest.fixture(scope="module")
def mp_setup():
    g = make_grid(dim=1, half_width=8.0, points=1024)
    params = make_params(g, 0.25, 0.5, 5.0, HSpec(width=1.0))
    u = solve_local_min(params, SolveOptions(), S_1D).u
    spec = BubbleSpec(0.1, (0.0,), 2.19)
    cut = CutoffSpec(1.5, (0.0,))
    return params, u, spec, cut


def test_path_sup_below_threshold(mp_setup):
    params, u, spec, cut = mp_setup
    ps = mp_path_sup(params, u, spec, cut)
    assert ps.sup_Istar < 0.25 * S_1D**2
    assert ps.max_gap <= 0
    assert ps.sup_I <= ps.sup_Istar
    w = path_point(params.grid, ps.t_I, spec, cut, params.s)
    assert eval_I(params, u, w) == pytest.approx(ps.sup_I, rel=1e-10)
    assert eval_I_star(params, u, w) >= ps.sup_I


def test_mountain_pass_second_solution(mp_setup):
    params, u, spec, cut = mp_setup
    res = solve_mountain_pass(params, u, SolveOptions(), spec, cut)
    assert res.converged
    assert 0 < res.energy < 0.25 * S_1D**2
    assert res.min_value >= -1e-8
    assert res.info["residual_f"] < 1e-4
    assert res.seminorm > 0.05


def test_mountain_pass_needs_path(mp_setup):
    params, u, _, _ = mp_setup
    with pytest.raises(ConfigurationError):
        solve_mountain_pass(params, u)


def test_mountain_pass_degenerate_start(mp_setup):
    params, u, _, _ = mp_setup
    tiny = Field(params.grid, np.zeros(params.grid.shape))
    with pytest.raises(DegeneratePathError):
        solve_mountain_pass(params, u, SolveOptions(), start=tiny)
