import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracpass.errors import ConfigurationError, SamplingError
from fracpass.grid import Field, GridSpec, integrate, lp_norm, make_grid, read_field, sample_field, write_field

from conftest import gaussian


def test_cell_centered_axis():
    g = make_grid(dim=1, half_width=4.0, points=8)
    np.testing.assert_allclose(g.axis, np.arange(-3.5, 4.0))
    assert g.spacing == 1.0 and g.weight == 1.0


def test_bad_specs_rejected():
    with pytest.raises(ConfigurationError):
        GridSpec(0, 1.0, 8)
    with pytest.raises(ConfigurationError):
        GridSpec(1, -1.0, 8)
    with pytest.raises(ConfigurationError):
        GridSpec(1, 1.0, 100)
    with pytest.raises(ConfigurationError):
        GridSpec(1, 1.0, 4)


def test_sampling_rejects_nonfinite(small1d):
    with pytest.raises(SamplingError):
        sample_field(small1d, lambda x: 1.0 / x * 0 + np.where(np.abs(x) < 0.1, np.inf, 1.0))


def test_gaussian_integral(grid2d):
    u = gaussian(grid2d)
    assert integrate(u) == pytest.approx(2 * np.pi, rel=1e-10)
    # ||u||_4^4 = int e^{-2|x|^2} = pi / 2
    assert lp_norm(u, 4) ** 4 == pytest.approx(np.pi / 2, rel=1e-10)


def test_field_arithmetic_checks_grid(small1d):
    other = make_grid(dim=1, half_width=4.0, points=128)
    with pytest.raises(ValueError):
        Field.zeros(small1d) + Field.zeros(other)


def test_field_round_trip(tmp_path, grid2d):
    u = gaussian(grid2d, 0.7, (0.3, -1.0))
    v = read_field(write_field(u, tmp_path / "u.field"))
    assert v.grid == u.grid
    np.testing.assert_array_equal(v.values, u.values)


def test_read_field_rejects_garbage(tmp_path):
    p = tmp_path / "bad.field"
    p.write_text("nonsense\n1\n")
    with pytest.raises(ConfigurationError):
        read_field(p)


@settings(max_examples=30, deadline=None)
@given(st.floats(1.0, 4.0), st.floats(-3.0, 3.0))
def test_lp_norm_homogeneous(p, logc):
    g = make_grid(dim=1, half_width=4.0, points=64)
    u = gaussian(g)
    c = np.exp(logc)
    assert lp_norm(u * c, p) == pytest.approx(c * lp_norm(u, p), rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=64, max_size=64), st.lists(st.floats(-5, 5), min_size=64, max_size=64))
def test_positive_part_and_triangle(a, b):
    g = make_grid(dim=1, half_width=4.0, points=64)
    u, v = Field(g, np.array(a)), Field(g, np.array(b))
    assert u.positive_part().min() >= 0
    np.testing.assert_allclose((u.positive_part() + u.negative_part()).values, u.values)
    assert lp_norm(u + v, 2) <= lp_norm(u, 2) + lp_norm(v, 2) + 1e-12
