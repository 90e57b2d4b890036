"""Computational grids and the discretized phase-space state."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from math import gamma, pi
from typing import Union

import numpy as np

from .errors import InvalidInput, InvalidParameter

DIMENSIONS = (3, 4, 5)


def check_dim(dim: int) -> int:
    if dim not in DIMENSIONS:
        raise InvalidParameter(f"dimension must be one of {DIMENSIONS}, got {dim}")
    return int(dim)


def sphere_area(dim: int) -> float:
    """Surface area of the unit sphere S^{dim-1}."""
    return 2.0 * pi ** (dim / 2) / gamma(dim / 2)


@dataclass(frozen=True)
class RadialGrid:
    """Uniform grid on [0, r_max] with node 0 at the origin.

    Every node owns a spherical shell cell ``[r_i - h/2, r_i + h/2]`` clipped
    to ``[0, r_max]``; the cell volumes (without the sphere area) are the
    quadrature weights and the mass matrix of the radial solver.
    """

    r_max: float
    n: int

    def __post_init__(self):
        if not self.r_max > 0:
            raise InvalidParameter("r_max must be positive")
        if self.n < 16:
            raise InvalidParameter("a radial grid needs at least 16 nodes")

    kind = "radial"

    @property
    def h(self) -> float:
        return self.r_max / (self.n - 1)

    @property
    def shape(self) -> tuple[int]:
        return (self.n,)

    @cached_property
    def r(self) -> np.ndarray:
        return np.arange(self.n) * self.h

    @cached_property
    def r_half(self) -> np.ndarray:
        return (np.arange(self.n - 1) + 0.5) * self.h

    def half_weights(self, dim: int) -> np.ndarray:
        """r^{dim-1} at the half nodes, the stiffness weights."""
        return self.r_half ** (dim - 1)

    def cell_volumes(self, dim: int) -> np.ndarray:
        edges = np.concatenate(([0.0], self.r_half, [self.r_max]))
        return (edges[1:] ** dim - edges[:-1] ** dim) / dim

    def descriptor(self) -> dict:
        return {"kind": "radial", "r_max": self.r_max, "n": self.n}


@dataclass(frozen=True)
class BoxGrid3D:
    """Uniform Cartesian grid on the cube [-half_width, half_width]^3."""

    half_width: float
    m: int

    def __post_init__(self):
        if not self.half_width > 0:
            raise InvalidParameter("half_width must be positive")
        if self.m < 8:
            raise InvalidParameter("a box grid needs at least 8 nodes per axis")

    kind = "box"

    @property
    def h(self) -> float:
        return 2.0 * self.half_width / (self.m - 1)

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.m, self.m, self.m)

    @cached_property
    def axis(self) -> np.ndarray:
        return np.linspace(-self.half_width, self.half_width, self.m)

    @cached_property
    def coords(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return tuple(np.meshgrid(self.axis, self.axis, self.axis, indexing="ij"))

    @cached_property
    def radius(self) -> np.ndarray:
        x, y, z = self.coords
        return np.sqrt(x * x + y * y + z * z)

    def points(self) -> np.ndarray:
        """Grid points as an array of shape (m, m, m, 3)."""
        return np.stack(self.coords, axis=-1)

    def descriptor(self) -> dict:
        return {"kind": "box", "half_width": self.half_width, "m": self.m}


Grid = Union[RadialGrid, BoxGrid3D]


def grid_from_descriptor(desc: dict) -> Grid:
    kind = desc.get("kind")
    if kind == "radial":
        return RadialGrid(float(desc["r_max"]), int(desc["n"]))
    if kind == "box":
        return BoxGrid3D(float(desc["half_width"]), int(desc["m"]))
    raise InvalidInput(f"unknown grid kind {kind!r}")


@dataclass(frozen=True, eq=False)
class FieldState:
    """A sampled element (u, du/dt) of the energy space."""

    u: np.ndarray
    ut: np.ndarray
    grid: Grid
    dim: int = 3
    t: float = field(default=0.0)

    def __post_init__(self):
        check_dim(self.dim)
        u = np.asarray(self.u, dtype=float)
        ut = np.asarray(self.ut, dtype=float)
        if u.shape != self.grid.shape or ut.shape != self.grid.shape:
            raise InvalidInput(
                f"field shapes {u.shape}/{ut.shape} do not match grid {self.grid.shape}"
            )
        if isinstance(self.grid, BoxGrid3D) and self.dim != 3:
            raise InvalidInput("box grids are three-dimensional")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(ut))):
            raise InvalidInput("field samples must be finite")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "ut", ut)

    @property
    def is_radial(self) -> bool:
        return isinstance(self.grid, RadialGrid)

    def replace(self, **changes) -> "FieldState":
        values = {"u": self.u, "ut": self.ut, "grid": self.grid, "dim": self.dim, "t": self.t}
        values.update(changes)
        return FieldState(**values)

    def scaled(self, a: float, b: float | None = None) -> "FieldState":
        """Return (a*u, b*ut); b defaults to a."""
        return self.replace(u=a * self.u, ut=(a if b is None else b) * self.ut)
