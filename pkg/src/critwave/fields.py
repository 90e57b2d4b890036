"""Quadrature and the scalar functionals of a field state.

Radial grids use finite-volume weights: node ``i`` stands for the shell
between its neighbouring half nodes. The gradient energy lives on the half
nodes, where the one-sided difference is centered, and is redistributed to
the nodes so that integrating the nodal energy density reproduces the
energy exactly. Box grids use the tensor trapezoid rule with fourth-order
centered gradients in the interior.

Every integral accepts ``far_field=True``, which corrects for the part of a
slowly decaying integrand (such as |grad W|^2 ~ r^{-2(N-1)}) that lies
outside the computational domain.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .closed_forms import critical_exponent, exact_quantities, ground_state_norms
from .errors import InvalidInput, TruncationWarning
from .grids import BoxGrid3D, FieldState, RadialGrid, sphere_area

# Nested domains and inverse powers used by the far-field extrapolation.
_LEVELS = 7
_TAIL_TERMS = 4


def quadrature_weights(grid, dim: int) -> np.ndarray:
    """Weights w with integral(f) = sum(w * f)."""
    if isinstance(grid, RadialGrid):
        return sphere_area(dim) * grid.cell_volumes(dim)
    if isinstance(grid, BoxGrid3D):
        w1 = _trapezoid_1d(grid.m, grid.h, 0)
        return w1[:, None, None] * w1[None, :, None] * w1[None, None, :]
    raise InvalidInput(f"unknown grid {grid!r}")


def _trapezoid_1d(m: int, h: float, trim: int) -> np.ndarray:
    w = np.zeros(m)
    w[trim : m - trim] = h
    w[trim] = w[m - 1 - trim] = 0.5 * h
    return w


def _fit_limit(lengths, values, dim: int) -> float:
    """Least-squares fit of I(L) = I_inf + sum_p c_p L^{-p}; returns I_inf.

    Energy-type integrands of finite-energy states with W-like tails leave
    remainders starting at L^{-(N-2)}.
    """
    lengths = np.asarray(lengths, dtype=float)
    powers = [dim - 2 + k for k in range(_TAIL_TERMS)]
    a = np.column_stack([np.ones_like(lengths)] + [lengths ** (-p) for p in powers])
    coef, *_ = np.linalg.lstsq(a, np.asarray(values, dtype=float), rcond=None)
    return float(coef[0])


def _radial_extrapolated(f: np.ndarray, grid: RadialGrid, dim: int) -> float:
    """Extrapolate integrals over nested balls r <= R_k to R = infinity."""
    cells = sphere_area(dim) * grid.cell_volumes(dim) * f
    partial = np.cumsum(cells)
    idx = np.unique(np.linspace(grid.n // 2, grid.n - 3, _LEVELS).astype(int))
    # the ball sum through node i ends at the half node i + 1/2
    return _fit_limit(grid.r_half[idx], partial[idx], dim)


def _box_extrapolated(f: np.ndarray, grid: BoxGrid3D) -> float:
    """Extrapolate integrals over nested sub-cubes to an infinite box."""
    m, h = grid.m, grid.h
    trims = np.unique(np.linspace(3, max(4, m // 4), _LEVELS).astype(int))
    lengths, values = [], []
    for k in trims:
        w = _trapezoid_1d(m, h, int(k))
        values.append(np.einsum("i,j,k,ijk->", w, w, w, f))
        lengths.append(grid.half_width - k * h)
    return _fit_limit(lengths, values, 3)


def integrate(f, grid, dim: int, far_field: bool = False) -> float:
    """Integrate a sampled scalar field over R^dim (radial) or the box.

    The sum runs in a fixed order, so results are bitwise reproducible.
    """
    f = np.asarray(f, dtype=float)
    if f.shape != grid.shape:
        raise InvalidInput(f"field shape {f.shape} does not match grid {grid.shape}")
    if far_field:
        if isinstance(grid, BoxGrid3D):
            return _box_extrapolated(f, grid)
        return _radial_extrapolated(f, grid, dim)
    return float(np.sum(quadrature_weights(grid, dim) * f))


def radial_derivative(u: np.ndarray, grid: RadialGrid) -> np.ndarray:
    """Nodal u_r: centered inside, zero at the origin, one-sided at r_max."""
    h = grid.h
    d = np.empty_like(u)
    d[1:-1] = (u[2:] - u[:-2]) / (2.0 * h)
    d[0] = 0.0
    d[-1] = (3.0 * u[-1] - 4.0 * u[-2] + u[-3]) / (2.0 * h)
    return d


def box_gradient(u: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Fourth-order centered gradient, second order within two nodes of the faces."""
    out = []
    for ax in range(3):
        g = np.gradient(u, h, axis=ax, edge_order=2)
        n = u.shape[ax]
        sl = lambda a, b: tuple(slice(a, b) if k == ax else slice(None) for k in range(3))
        g[sl(2, n - 2)] = (
            -u[sl(4, n)] + 8.0 * u[sl(3, n - 1)] - 8.0 * u[sl(1, n - 3)] + u[sl(0, n - 4)]
        ) / (12.0 * h)
        out.append(g)
    return tuple(out)


def grad_sq_density(state: FieldState) -> np.ndarray:
    """Nodal |grad u|^2 whose integral is the discrete Dirichlet energy."""
    grid = state.grid
    if isinstance(grid, RadialGrid):
        n = state.dim
        h = grid.h
        d = np.diff(state.u) / h
        half = 0.5 * h * grid.half_weights(n) * d * d
        acc = np.zeros(grid.n)
        acc[:-1] += half
        acc[1:] += half
        return acc / grid.cell_volumes(n)
    gx, gy, gz = box_gradient(state.u, grid.h)
    return gx * gx + gy * gy + gz * gz


def potential_density(state: FieldState) -> np.ndarray:
    return np.abs(state.u) ** critical_exponent(state.dim)


def energy_density(state: FieldState) -> np.ndarray:
    """e(u) = |grad u|^2/2 + u_t^2/2 - (N-2)/(2N) |u|^{2N/(N-2)} at each node."""
    n = state.dim
    return (
        0.5 * grad_sq_density(state)
        + 0.5 * state.ut**2
        - (n - 2) / (2.0 * n) * potential_density(state)
    )


def gradient_components(state: FieldState) -> tuple[np.ndarray, ...]:
    """Cartesian gradient components on box grids."""
    if not isinstance(state.grid, BoxGrid3D):
        raise InvalidInput("Cartesian gradients need a box grid")
    return box_gradient(state.u, state.grid.h)


@dataclass(frozen=True)
class Norms:
    grad_sq: float
    dt_sq: float
    potential: float


@dataclass(frozen=True)
class ConservedQuantities:
    E: float
    P: np.ndarray
    grad_sq: float
    dt_sq: float
    potential: float

    def to_dict(self) -> dict:
        return {
            "E": self.E,
            "P": [float(v) for v in self.P],
            "grad_sq": self.grad_sq,
            "dt_sq": self.dt_sq,
            "potential": self.potential,
        }


def norms(state: FieldState, far_field: bool = False) -> Norms:
    g, n = state.grid, state.dim
    return Norms(
        grad_sq=integrate(grad_sq_density(state), g, n, far_field),
        dt_sq=integrate(state.ut**2, g, n, far_field),
        potential=integrate(potential_density(state), g, n, far_field),
    )


def momentum(state: FieldState, far_field: bool = False) -> np.ndarray:
    """P = int u_t grad u; identically zero for radial states."""
    if state.is_radial:
        return np.zeros(state.dim)
    comps = gradient_components(state)
    return np.array([integrate(state.ut * c, state.grid, 3, far_field) for c in comps])


def conserved_quantities(state: FieldState, far_field: bool = False) -> ConservedQuantities:
    nm = norms(state, far_field)
    n = state.dim
    energy = 0.5 * nm.dt_sq + 0.5 * nm.grad_sq - (n - 2) / (2.0 * n) * nm.potential
    return ConservedQuantities(energy, momentum(state, far_field), nm.grad_sq, nm.dt_sq, nm.potential)


def exterior_energy(state: FieldState, rho: float) -> float:
    """int_{|x| >= rho} (|grad u|^2 + u_t^2), partial cells weighted linearly."""
    if rho < 0:
        raise InvalidInput("rho must be non-negative")
    grid, n = state.grid, state.dim
    dens = grad_sq_density(state) + state.ut**2
    if isinstance(grid, RadialGrid):
        if rho > grid.r_max:
            warnings.warn(f"rho={rho} lies beyond r_max={grid.r_max}", TruncationWarning)
            return 0.0
        edges = np.concatenate(([0.0], grid.r_half, [grid.r_max]))
        lo, hi = edges[:-1], edges[1:]
        frac = np.clip((hi - rho) / (hi - lo), 0.0, 1.0)
    else:
        if rho > np.sqrt(3.0) * grid.half_width:
            warnings.warn(f"rho={rho} lies beyond the box corner", TruncationWarning)
            return 0.0
        frac = np.clip((grid.radius - rho) / grid.h + 0.5, 0.0, 1.0)
    return float(np.sum(quadrature_weights(grid, n) * dens * frac))


def dl_functional(state: FieldState, ell: float, dim: int | None = None, far_field: bool = False) -> float:
    """d_ell = |grad u|^2 + |u_t|^2 minus the same norms of W_ell(0), from exact formulas."""
    n = state.dim if dim is None else dim
    if n != state.dim:
        raise InvalidInput(f"state dimension {state.dim} differs from {n}")
    q = exact_quantities(ell, n)
    K = ground_state_norms(n).K
    nm = norms(state, far_field)
    return nm.grad_sq + nm.dt_sq - K * (q.grad_norm_ratio + q.dt_norm_ratio)


def first_moment_energy(state: FieldState, far_field: bool = False) -> np.ndarray:
    """int x e(u) dx; zero by symmetry for radial states."""
    if state.is_radial:
        return np.zeros(state.dim)
    e = energy_density(state)
    return np.array([integrate(x * e, state.grid, 3, far_field) for x in state.grid.coords])


def hardy_integral(state: FieldState, far_field: bool = False) -> float:
    """int u^2/|x|^2.

    On radial grids each shell carries the exact moment of r^{-2} over the
    shell, which keeps the rule second order despite the singular weight.
    Box grids drop a node at the origin.
    """
    g = state.grid
    n = state.dim
    if isinstance(g, RadialGrid):
        edges = np.concatenate(([0.0], g.r_half, [g.r_max]))
        inv_r2 = (edges[1:] ** (n - 2) - edges[:-1] ** (n - 2)) / (n - 2) / g.cell_volumes(n)
        f = state.u**2 * inv_r2
    else:
        r = g.radius
        with np.errstate(divide="ignore", invalid="ignore"):
            f = np.where(r > 0, state.u**2 / np.where(r > 0, r * r, 1.0), 0.0)
    return integrate(f, g, n, far_field)


@dataclass(frozen=True)
class VariationalRegion:
    region: str
    grad_sq: float
    K: float
    global_hypothesis: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def variational_region(
    state: FieldState, dim: int | None = None, tol: float = 1e-9, far_field: bool = False
) -> VariationalRegion:
    """Place |grad u|^2 against K and 2K with closed comparisons at relative ``tol``.

    ``global_hypothesis`` reports |grad u|^2 + (N-2)/2 |u_t|^2 < K.
    """
    n = state.dim if dim is None else dim
    K = ground_state_norms(n).K
    nm = norms(state, far_field)
    g = nm.grad_sq
    if g < K * (1.0 - tol):
        region = "below_W"
    elif g <= 2.0 * K * (1.0 + tol):
        region = "between"
    else:
        region = "above_2W"
    hyp = g + 0.5 * (n - 2) * nm.dt_sq < K
    return VariationalRegion(region, g, K, bool(hyp))
