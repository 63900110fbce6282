import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracpass.analysis import (
    appendix_rate_fit,
    appendix_ratio,
    check_cutoff_bounds,
    check_power_inequalities,
    concentration_diagnostics,
    dyadic_vanishing_small,
    extension_gamma,
    fit_cutoff_constant,
    linear_term_constant,
    linear_term_report,
    power_holder_constant,
    predicted_extension_slope,
    superadditivity_report,
)
from fracpass.errors import ConfigurationError
from fracpass.grid import make_grid

from conftest import gaussian


def test_linear_constant_p2_is_two():
    assert linear_term_constant(2.0) == pytest.approx(2.0, abs=1e-12)


@pytest.mark.parametrize("p", [2.0, 3.0, 4.0])
def test_linear_constant_is_p_for_p_ge_2(p):
    # the ratio ((1+t)^p - 1 - t^p)/t tends to p as t -> 0 and is minimal there for p >= 2
    assert linear_term_constant(p) == pytest.approx(p, rel=1e-6)


def test_bounded_linear_constant_positive():
    for k in (0.5, 1.0, 4.0):
        c = linear_term_constant(1.5, k)
        assert 0 < c <= 1.5
    assert linear_term_constant(1.5, 0.5) >= linear_term_constant(1.5, 4.0)


def test_power_holder_constant_is_one():
    for q in (0.25, 0.5, 0.75):
        assert power_holder_constant(q) == pytest.approx(1.0, abs=1e-9)


def test_inequality_suite_has_no_violations():
    reports = check_power_inequalities(ab_samples=20_000, seed=3)
    assert all(r.violations == 0 for r in reports), [r for r in reports if r.violations]
    ids = {r.lemma_id for r in reports}
    assert "superadditivity[p=2]" in ids and "power_holder[q=0.5]" in ids


def test_linear_report_domain_checks():
    a = np.ones(3)
    with pytest.raises(ConfigurationError):
        linear_term_report(1.5, a, a)
    with pytest.raises(ConfigurationError):
        linear_term_report(2.5, a, a, k=1.0)
    with pytest.raises(ConfigurationError):
        superadditivity_report(1.0, a, a)


@settings(max_examples=200, deadline=None)
@given(st.floats(1.01, 8.0), st.floats(1e-3, 1e3), st.floats(1e-3, 1e3))
def test_superadditivity_property(p, a, b):
    assert (a + b) ** p >= (a**p + b**p) * (1 - 1e-12)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(0.0, 1e3), st.floats(0.0, 1e3))
def test_power_holder_property(q, a, b):
    assert abs(a**q - b**q) <= abs(a - b) ** q * (1 + 1e-12) + 1e-12


def test_cutoff_constant_stable_1d(grid1d):
    rep = check_cutoff_bounds(grid1d, 0.25)
    assert rep.violations == 0
    assert rep.details["max_ratio"] < 2


def test_cutoff_constant_rejects_big_radius(grid1d):
    with pytest.raises(ConfigurationError):
        check_cutoff_bounds(grid1d, 0.25, radii=(10.0,))


def test_cutoff_constant_positive(grid2d):
    assert fit_cutoff_constant(grid2d, 0.75, 1.0) > 0


def test_dyadic_vanishing_small_monotone():
    g = make_grid(dim=2, half_width=4.0, points=256)
    rep = dyadic_vanishing_small(gaussian(g, np.sqrt(8.0)), 0.1)
    assert rep.monotone
    assert rep.ratio < 0.01


def test_concentration_bubbling_fraction_increases(grid1d):
    rep = concentration_diagnostics(grid1d, 0.25, 8.4946, 2.19, "bubbling", n_max=3)
    assert np.all(np.diff(rep.ball_fractions) > 0)
    assert rep.worst_relation_ratio <= 1.05


def test_concentration_escaping_leaves_ball(grid1d):
    with pytest.warns(UserWarning):
        rep = concentration_diagnostics(grid1d, 0.25, 8.4946, 2.19, "escaping", n_max=4)
    assert rep.ball_fractions[0] > rep.ball_fractions[-1]
    assert rep.terms[-1]["ball_fraction"] < 0.1


def test_concentration_unknown_kind(grid1d):
    with pytest.raises(ConfigurationError):
        concentration_diagnostics(grid1d, 0.25, 8.0, 2.0, "sideways")


def test_predicted_slopes():
    assert extension_gamma(2, 0.75) == 5.0
    assert predicted_extension_slope(2, 0.75) == pytest.approx(0.2)
    assert predicted_extension_slope(2, 0.6) == pytest.approx(0.0714285714, rel=1e-8)
    assert predicted_extension_slope(1, 0.25) < 0


def test_appendix_ratio_domain():
    with pytest.raises(ValueError):
        appendix_ratio(0.75, 2, 1.0)
    with pytest.raises(ConfigurationError):
        appendix_rate_fit(0.75, 2, [4.0, 8.0])
    with pytest.raises(ConfigurationError):
        appendix_rate_fit(0.75, 2, [4.0, 8.0, 12.0])


def test_appendix_slope_fast_case():
    slope = appendix_rate_fit(0.75, 2, [4.0, 8.0, 16.0, 32.0], resolution=32)
    assert slope == pytest.approx(0.2, abs=0.02)
