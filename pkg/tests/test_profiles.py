import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import gamma

from fracpass.errors import CalibrationError, ConfigurationError
from fracpass.grid import integrate, make_grid
from fracpass.nonlocal_ops import critical_exponent, gagliardo_seminorm_sq, symbol_scale
from fracpass.profiles import (
    BubbleSpec,
    CutoffSpec,
    bubble,
    calibrate,
    cutoff,
    extrapolated_sobolev_constant,
    loglog_slope,
    outer_cutoff,
    path_point,
    smoothstep_profile,
    sobolev_constant_estimate,
)


def continuum_sobolev(dim, s):
    """Sharp constant for the double-integral seminorm (symbol scale times the Laplacian-normalised value)."""
    lap = 2**(2 * s) * np.pi**s * gamma((dim + 2 * s) / 2) / gamma((dim - 2 * s) / 2) * (gamma(dim / 2) / gamma(dim)) ** (2 * s / dim)
    return symbol_scale(dim, s) * lap


def continuum_bubble_constant(dim, s):
    p = critical_exponent(dim, s)
    val = symbol_scale(dim, s) * 2 ** (2 * s) * gamma((dim + 2 * s) / 2) / gamma((dim - 2 * s) / 2)
    return val ** (1 / (p - 2))


def test_continuum_oracles_reference_values():
    assert continuum_sobolev(1, 0.25) == pytest.approx(8.494593, rel=1e-6)
    assert continuum_bubble_constant(1, 0.25) == pytest.approx(2.1892, rel=1e-4)


def test_smoothstep_profile_shape():
    rho = np.linspace(0, 1.5, 301)
    phi = smoothstep_profile(rho)
    assert np.all(phi[rho <= 0.5] == 1) and np.all(phi[rho >= 1] == 0)
    assert np.all(np.diff(phi) <= 0)


def test_cutoff_and_outer_sum_to_one(grid2d):
    np.testing.assert_allclose((cutoff(grid2d, CutoffSpec(2.0, (0.0, 0.0))) + outer_cutoff(grid2d, 2.0)).values, 1.0)


def test_path_point_is_linear(grid1d):
    spec, cut = BubbleSpec(0.5, (0.0,), 2.0), CutoffSpec(2.0, (0.0,))
    a = path_point(grid1d, 1.0, spec, cut, 0.25)
    np.testing.assert_allclose(path_point(grid1d, 3.0, spec, cut, 0.25).values, 3 * a.values)
    with pytest.raises(ValueError):
        path_point(grid1d, -1.0, spec, cut, 0.25)


def test_bubble_warns_near_edge(grid1d):
    with pytest.warns(UserWarning):
        bubble(grid1d, BubbleSpec(1.0, (6.0,), 1.0), 0.25)


def test_bad_specs():
    with pytest.raises(ConfigurationError):
        BubbleSpec(mu=0.0)
    with pytest.raises(ConfigurationError):
        CutoffSpec(r=-1.0)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.25, 2.0), st.floats(-1.0, 1.0))
def test_bubble_peak_and_symmetry(mu, xi):
    g = make_grid(dim=1, half_width=64.0, points=1024)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        z = bubble(g, BubbleSpec(mu, (xi,), 1.0), 0.25)
    assert z.max() <= mu ** (-0.25) * (1 + 1e-12)
    # symmetric about xi up to sampling
    left = np.interp(xi - 3.0, g.axis, z.values)
    right = np.interp(xi + 3.0, g.axis, z.values)
    assert left == pytest.approx(right, rel=1e-2)


def test_calibration_near_continuum_1d(grid1d):
    cal = calibrate(grid1d, 0.25)
    assert 0.8 < cal.c_ns / continuum_bubble_constant(1, 0.25) < 1.3
    assert cal.relative_residual < 0.2


def test_calibration_rejects_bad_bracket(grid1d):
    with pytest.raises(CalibrationError):
        calibrate(grid1d, 0.25, bounds=(10.0, 100.0))


def test_extrapolated_sobolev_1d():
    est = extrapolated_sobolev_constant(1, 0.25)
    assert est.S_hat == pytest.approx(continuum_sobolev(1, 0.25), rel=1e-3)


def test_sobolev_quotient_above_continuum(grid2d):
    est = sobolev_constant_estimate(grid2d, 0.75, c_ns=1.0)
    # cut-off bubble is an admissible test function: quotient >= S up to discretisation
    assert est.S_hat >= 0.97 * continuum_sobolev(2, 0.75)
    z = bubble(grid2d, BubbleSpec(1.0, (0.0, 0.0), 1.0), 0.75) * cutoff(grid2d, CutoffSpec(grid2d.half_width, (0.0, 0.0)))
    assert est.seminorm_sq == pytest.approx(gagliardo_seminorm_sq(z, 0.75))


def test_uncut_quotient_grows_under_refinement_when_2s_ge_1():
    # the edge jump has infinite seminorm for s >= 1/2, so the uncut quotient is not a valid estimate
    coarse = sobolev_constant_estimate(make_grid(dim=2, half_width=8.0, points=64), 0.75, c_ns=1.0, cut=False)
    fine = sobolev_constant_estimate(make_grid(dim=2, half_width=8.0, points=256), 0.75, c_ns=1.0, cut=False)
    assert fine.S_hat > 1.1 * coarse.S_hat
    coarse = sobolev_constant_estimate(make_grid(dim=2, half_width=8.0, points=64), 0.75, c_ns=1.0)
    fine = sobolev_constant_estimate(make_grid(dim=2, half_width=8.0, points=256), 0.75, c_ns=1.0)
    assert fine.S_hat == pytest.approx(coarse.S_hat, rel=0.02)


@pytest.mark.parametrize(
    "dim, s, widths, ppu, rel",
    [(2, 0.25, (8.0, 16.0, 32.0), 8, 0.005), (2, 0.75, (8.0, 16.0, 32.0), 8, 0.05), (3, 0.75, (4.0, 8.0, 16.0), 4, 0.005)],
)
def test_extrapolated_sobolev_multid(dim, s, widths, ppu, rel):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        est = extrapolated_sobolev_constant(dim, s, widths, ppu)
    assert est.S_hat == pytest.approx(continuum_sobolev(dim, s), rel=rel)


def test_loglog_slope_exact():
    x = np.array([1.0, 2.0, 4.0])
    assert loglog_slope(x, 3 * x**1.7) == pytest.approx(1.7)
    with pytest.raises(ValueError):
        loglog_slope(x, [1.0, -1.0, 2.0])
