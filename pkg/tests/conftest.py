import numpy as np
import pytest

from fracpass.grid import Field, make_grid, sample_field

DESK_1D = dict(dim=1, half_width=8.0, points=512)
DESK_2D = dict(dim=2, half_width=8.0, points=128)


def gaussian(grid, width=1.0, center=None):
    c = np.zeros(grid.dim) if center is None else np.asarray(center, float)
    return sample_field(grid, lambda *x: np.exp(-sum((xi - ci) ** 2 for xi, ci in zip(x, c)) / (2 * width**2)))


@pytest.fixture(scope="session")
def grid1d():
    return make_grid(**DESK_1D)


@pytest.fixture(scope="session")
def grid2d():
    return make_grid(**DESK_2D)


@pytest.fixture(scope="session")
def small1d():
    return make_grid(dim=1, half_width=4.0, points=64)


def random_smooth(grid, rng, floor=None, bumps=3):
    """Sum of random Gaussian bumps; with ``floor`` the field is shifted to stay above it."""
    vals = np.zeros(grid.shape)
    L = grid.half_width
    for _ in range(bumps):
        c = rng.uniform(-L / 3, L / 3, grid.dim)
        w = rng.uniform(0.5, 2.0)
        a = rng.uniform(-1.0, 1.0) if floor is None else rng.uniform(0.2, 1.0)
        vals += a * gaussian(grid, w, c).values
    if floor is not None:
        vals += floor
    return Field(grid, vals)


ACCEPTANCE_LINES = []


def record_criterion(cid: int, ok: bool, detail: str):
    """Store and print one pass/fail line for an acceptance criterion."""
    line = f"[criterion {cid:2d}] {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append((cid, line))
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
