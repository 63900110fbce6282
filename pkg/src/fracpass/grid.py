"""Truncated uniform grids on [-L, L]^N and scalar fields sampled on them.

Nodes are cell-centred, ``x_i = -L + (i + 1/2) h`` with ``h = 2L/M``, and the
quadrature weight of every node is ``h**N``.  Values outside the box are
implicitly zero.  Node ordering is row-major (C order) so a field file written
on one machine reads back identically on another.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import ConfigurationError, SamplingError

FIELD_HEADER = "fracpass-field v1"


@dataclass(frozen=True)
class GridSpec:
    """Shape of a truncated grid.

    Attributes
    ----------
    dim : int
        Spatial dimension N, 1 to 3.
    half_width : float
        Half side length L of the box [-L, L]^N.
    points : int
        Points per axis M; a power of two, at least 8.
    """

    dim: int
    half_width: float
    points: int

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ConfigurationError(f"dimension must be 1, 2 or 3, got {self.dim}")
        if not self.half_width > 0 or not np.isfinite(self.half_width):
            raise ConfigurationError(f"half_width must be positive, got {self.half_width}")
        m = self.points
        if m < 8 or m & (m - 1):
            raise ConfigurationError(f"points per axis must be a power of two >= 8, got {m}")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.points

    @property
    def weight(self) -> float:
        return self.spacing**self.dim

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points,) * self.dim

    @property
    def size(self) -> int:
        return self.points**self.dim


class Grid:
    """Node coordinates and quadrature for a :class:`GridSpec`."""

    def __init__(self, spec: GridSpec):
        self.spec = spec

    def __repr__(self):
        s = self.spec
        return f"Grid(N={s.dim}, L={s.half_width}, M={s.points})"

    def __eq__(self, other):
        return isinstance(other, Grid) and other.spec == self.spec

    def __hash__(self):
        return hash(self.spec)

    dim = property(lambda self: self.spec.dim)
    half_width = property(lambda self: self.spec.half_width)
    points = property(lambda self: self.spec.points)
    spacing = property(lambda self: self.spec.spacing)
    weight = property(lambda self: self.spec.weight)
    shape = property(lambda self: self.spec.shape)
    size = property(lambda self: self.spec.size)

    @cached_property
    def axis(self) -> np.ndarray:
        h = self.spacing
        return -self.half_width + (np.arange(self.points) + 0.5) * h

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        """Broadcastable coordinate arrays, one per axis (sparse meshgrid)."""
        return tuple(np.meshgrid(*([self.axis] * self.dim), indexing="ij", sparse=True))

    def radius(self, center=None) -> np.ndarray:
        """|x - center| at every node, shaped like the grid."""
        c = np.zeros(self.dim) if center is None else np.broadcast_to(np.asarray(center, float), (self.dim,))
        r2 = sum((x - ci) ** 2 for x, ci in zip(self.coords, c))
        return np.sqrt(np.broadcast_to(r2, self.shape))

    def nodes(self) -> np.ndarray:
        """All node coordinates as an (M**N, N) array in row-major order."""
        full = np.meshgrid(*([self.axis] * self.dim), indexing="ij")
        return np.stack([f.ravel() for f in full], axis=1)

    def nearest_node(self, point) -> tuple[int, ...]:
        p = np.broadcast_to(np.asarray(point, float), (self.dim,))
        idx = np.floor((p + self.half_width) / self.spacing).astype(int)
        return tuple(int(i) for i in np.clip(idx, 0, self.points - 1))


def make_grid(spec: GridSpec | None = None, *, dim=None, half_width=None, points=None) -> Grid:
    if spec is None:
        spec = GridSpec(dim, half_width, points)
    return Grid(spec)


@dataclass(frozen=True, eq=False)
class Field:
    """Samples of a real function on a grid, zero outside the box.

    ``values`` is stored with the grid's N-dimensional shape and is made
    read-only; arithmetic returns new fields.
    """

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float, copy=True).reshape(self.grid.shape)
        if not np.all(np.isfinite(v)):
            raise SamplingError("field contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, grid: Grid) -> "Field":
        return cls(grid, np.zeros(grid.shape))

    def flat(self) -> np.ndarray:
        return self.values.ravel()

    def with_values(self, values) -> "Field":
        return Field(self.grid, values)

    def _other(self, other):
        if isinstance(other, Field):
            check_same_grid(self, other)
            return other.values
        return other

    def __add__(self, other):
        return self.with_values(self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self.with_values(self.values - self._other(other))

    def __rsub__(self, other):
        return self.with_values(self._other(other) - self.values)

    def __mul__(self, other):
        return self.with_values(self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self.with_values(self.values / self._other(other))

    def __neg__(self):
        return self.with_values(-self.values)

    def positive_part(self) -> "Field":
        return self.with_values(np.maximum(self.values, 0.0))

    def negative_part(self) -> "Field":
        return self.with_values(np.minimum(self.values, 0.0))

    def min(self) -> float:
        return float(self.values.min())

    def max(self) -> float:
        return float(self.values.max())


def check_same_grid(u: Field, v: Field):
    if u.grid.spec != v.grid.spec:
        raise ValueError(f"grid mismatch: {u.grid!r} vs {v.grid!r}")


def sample_field(grid: Grid, f: Callable[..., np.ndarray]) -> Field:
    """Evaluate ``f(*coords)`` at every node.

    ``f`` receives one broadcastable coordinate array per axis and must
    return something broadcastable to the grid shape.
    """
    vals = np.broadcast_to(np.asarray(f(*grid.coords), dtype=float), grid.shape)
    bad = ~np.isfinite(vals)
    if bad.any():
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        x = tuple(float(grid.axis[i]) for i in idx)
        raise SamplingError(f"non-finite sample at node {idx} (x = {x})")
    return Field(grid, vals)


def integrate(u: Field) -> float:
    return float(u.grid.weight * np.sum(u.values))


def lp_norm(u: Field, p: float) -> float:
    if not p >= 1:
        raise ValueError(f"lp_norm needs p >= 1, got {p}")
    a = np.abs(u.values)
    if not a.any():
        return 0.0
    # scale out the max to keep |u|^p from under/overflowing
    top = a.max()
    return float(top * (u.grid.weight * np.sum((a / top) ** p)) ** (1.0 / p))


def write_field(u: Field, path) -> Path:
    path = Path(path)
    s = u.grid.spec
    with path.open("w") as fh:
        fh.write(f"{FIELD_HEADER} N={s.dim} L={s.half_width!r} M={s.points}\n")
        np.savetxt(fh, u.flat(), fmt="%.17g")
    return path


def read_field(path) -> Field:
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().split()
        if " ".join(header[:2]) != FIELD_HEADER or len(header) != 5:
            raise ConfigurationError(f"{path}: not a fracpass field file")
        kv = dict(tok.split("=", 1) for tok in header[2:])
        spec = GridSpec(int(kv["N"]), float(kv["L"]), int(kv["M"]))
        vals = np.loadtxt(fh, dtype=float, ndmin=1)
    if vals.size != spec.size:
        raise ConfigurationError(f"{path}: expected {spec.size} values, found {vals.size}")
    return Field(Grid(spec), vals)
