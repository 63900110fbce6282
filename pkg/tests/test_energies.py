import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracpass.energies import (
    G_point,
    HSpec,
    Params,
    eval_f,
    eval_I,
    eval_I_star,
    g_point,
    grad_f,
    grad_I,
    gstar_Gstar_point,
    gtilde_Gtilde_point,
    h1_ball,
    h_gtilde_integral,
    make_h,
    make_params,
    pair_df,
    pair_dI,
)
from fracpass.errors import ConfigurationError, HypothesisH1Error
from fracpass.grid import Field, integrate, make_grid

from conftest import random_smooth


@pytest.fixture(scope="module")
def params1d(grid1d):
    return make_params(grid1d, 0.25, 0.5, 0.3, HSpec(width=2.0))


@pytest.fixture(scope="module")
def params2d(grid2d):
    return make_params(grid2d, 0.75, 0.5, 0.3, HSpec(center=(0.0, 0.0), width=2.0))


def fd_rel_error(fun, pair, u, v, delta=1e-4):
    fd = (fun(u + v * delta) - fun(u - v * delta)) / (2 * delta)
    an = pair(u, v)
    return abs(fd - an) / max(abs(an), 1e-12)


@pytest.mark.parametrize("name", ["params1d", "params2d"])
def test_pair_df_finite_difference(name, request):
    params = request.getfixturevalue(name)
    rng = np.random.default_rng(11)
    for _ in range(5):
        u = random_smooth(params.grid, rng, floor=0.2)
        v = random_smooth(params.grid, rng)
        err = fd_rel_error(lambda x: eval_f(params, x), lambda a, b: pair_df(params, a, b), u, v)
        assert err <= 1e-6


@pytest.mark.parametrize("name", ["params1d", "params2d"])
def test_pair_dI_finite_difference(name, request):
    params = request.getfixturevalue(name)
    rng = np.random.default_rng(12)
    for _ in range(5):
        ue = random_smooth(params.grid, rng, floor=0.1)
        v = random_smooth(params.grid, rng, floor=0.2)
        w = random_smooth(params.grid, rng)
        err = fd_rel_error(lambda x: eval_I(params, ue, x), lambda a, b: pair_dI(params, ue, a, b), v, w)
        assert err <= 1e-6


def test_gradient_is_riesz_representer(params1d):
    rng = np.random.default_rng(3)
    u, v = random_smooth(params1d.grid, rng, floor=0.1), random_smooth(params1d.grid, rng)
    assert integrate(grad_f(params1d, u) * v) == pytest.approx(pair_df(params1d, u, v), rel=1e-10)
    assert integrate(grad_I(params1d, u, v) * u) == pytest.approx(pair_dI(params1d, u, v, u), rel=1e-10)


def test_translated_functional_identity(params1d):
    """I(v) = f(u + v) - f(u) - <f'(u), v> for v >= 0."""
    rng = np.random.default_rng(4)
    u = random_smooth(params1d.grid, rng, floor=0.05)
    v = random_smooth(params1d.grid, rng, floor=0.0)
    lhs = eval_I(params1d, u, v)
    rhs = eval_f(params1d, u + v) - eval_f(params1d, u) - pair_df(params1d, u, v)
    assert lhs == pytest.approx(rhs, rel=1e-9)


def test_I_star_splits_off_h_term(params1d):
    rng = np.random.default_rng(5)
    u = random_smooth(params1d.grid, rng, floor=0.05)
    v = random_smooth(params1d.grid, rng, floor=0.0)
    gap = eval_I_star(params1d, u, v) - eval_I(params1d, u, v)
    assert gap == pytest.approx(params1d.eps * h_gtilde_integral(params1d, u, v), rel=1e-10)
    assert gap >= 0  # h >= 0 here


def test_negative_u_eps_rejected(params1d):
    u = Field(params1d.grid, -np.ones(params1d.grid.shape))
    with pytest.raises(ValueError):
        eval_I(params1d, u, u)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.0, 10.0), st.floats(-5.0, 10.0), st.floats(0.05, 0.95))
def test_primitives_are_antiderivatives(a, t, q):
    params = make_params(make_grid(dim=1, half_width=4.0, points=64), 0.25, q, 0.5)
    d = 1e-6 * abs(t)
    for fun in (gtilde_Gtilde_point, gstar_Gstar_point):
        if t - d <= 0 <= t + d:
            continue
        _, hi = fun(params, a, t + d)
        _, lo = fun(params, a, t - d)
        g, _ = fun(params, a, t)
        fd = (hi - lo) / (2 * d)
        assert fd == pytest.approx(float(g), rel=1e-5, abs=1e-7)


@settings(max_examples=60, deadline=None)
@given(st.floats(1e-6, 1e3), st.floats(1e-8, 1e3))
def test_G_matches_direct_formula(a, t):
    params = make_params(make_grid(dim=1, half_width=4.0, points=64), 0.25, 0.5, 0.7)
    q, p = params.q, params.crit
    F = lambda x, h: params.eps * h * x ** (q + 1) / (q + 1) + x**p / p
    f = lambda x, h: params.eps * h * x**q + x ** (p - 1)
    h = 0.8
    direct = F(a + t, h) - F(a, h) - f(a, h) * t
    got = float(G_point(params, a, h, t))
    assert got == pytest.approx(direct, rel=1e-6, abs=1e-12 * max(1.0, F(a + t, h)))
    assert float(g_point(params, a, h, t)) == pytest.approx(f(a + t, h) - f(a, h), rel=1e-6, abs=1e-12 * f(a + t, h))


def test_G_vanishes_for_nonpositive_increment():
    params = make_params(make_grid(dim=1, half_width=4.0, points=64), 0.25, 0.5, 0.7)
    assert float(G_point(params, 1.3, 0.8, -2.0)) == 0.0
    assert float(g_point(params, 1.3, 0.8, -2.0)) == 0.0


def test_h1_ball_gaussian(grid1d):
    h = make_h(grid1d, HSpec(width=1.0))
    center, radius, inf_h = h1_ball(h)
    # exp(-r^2) >= 0.1 out to r = sqrt(ln 10)
    assert abs(center[0]) <= grid1d.spacing
    assert radius == pytest.approx(np.sqrt(np.log(10)), abs=2 * grid1d.spacing)
    assert inf_h >= 0.1 * h.max() - 1e-12


def test_h1_ball_signed_pair_and_failures(grid1d):
    h = make_h(grid1d, HSpec("signed_pair", width=1.0, neg_ratio=0.5, offset=3.0))
    assert h.min() < 0
    center, _, _ = h1_ball(h)
    assert abs(center[0]) < 0.5
    with pytest.raises(HypothesisH1Error):
        h1_ball(h.with_values(-np.abs(h.values)))
    with pytest.raises(HypothesisH1Error):
        h1_ball(h, h_min=10.0)


def test_params_validation(grid1d):
    h = make_h(grid1d, HSpec())
    with pytest.raises(ConfigurationError):
        Params(0.25, 1.5, 0.1, h)
    with pytest.raises(ConfigurationError):
        Params(0.25, 0.5, 0.0, h)
    with pytest.raises(ValueError):
        Params(0.6, 0.5, 0.1, h)
    p = Params(0.25, 0.5, 0.1, h)
    assert p.crit == 4.0
    assert p.holder_exponent() == pytest.approx(4 / 2.5)


def test_compact_bump_support(grid1d):
    h = make_h(grid1d, HSpec("compact_bump", width=2.0))
    assert np.all(h.values[np.abs(grid1d.axis) >= 2.0] == 0)
    assert h.max() == 1.0
