"""Exact free waves for radial data in three dimensions.

With v = r u the radial wave equation becomes v_tt = v_rr on the half line
with v(t, 0) = 0, solved by d'Alembert's formula after odd reflection. On a
uniform grid and at times t = k h the formula shifts nodal values by exactly
k nodes, so the only error left is the sampling of the data.

The antiderivative of v1 is taken to be the discrete one with centered
difference exactly v1. With that choice ``linear_energy`` (built from
centered differences of v) is invariant under the evolution to roundoff.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import roots_legendre

from .errors import InvalidInput, InvalidTime, TruncationError, Unsupported
from .fields import exterior_energy, norms
from .grids import FieldState, RadialGrid
from .nonlinear import support_radius

# Time steps per unit support radius in the equipartition series.
_SERIES_SAMPLES = 96


def _check_radial3(state: FieldState) -> RadialGrid:
    if not isinstance(state.grid, RadialGrid) or state.dim != 3:
        raise Unsupported("exact linear propagation needs radial data with N = 3")
    return state.grid


def time_to_steps(t: float, grid: RadialGrid, rtol: float = 1e-9) -> int:
    """The integer k with t = k h, or InvalidTime."""
    k = round(t / grid.h)
    if abs(t - k * grid.h) > rtol * max(1.0, abs(t)):
        raise InvalidTime(f"t = {t} is not a multiple of h = {grid.h}")
    return int(k)


def _odd_lookup(a: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """a at signed indices with a(-j) = -a(j); zero beyond the array."""
    j = np.abs(idx)
    out = np.where(j < a.size, a[np.minimum(j, a.size - 1)], 0.0)
    return np.sign(idx) * out


def _even_lookup(a: np.ndarray, idx: np.ndarray, tail: tuple[float, float]) -> np.ndarray:
    """a at signed indices with a(-j) = a(j); beyond the array, the last value of the same parity."""
    j = np.abs(idx)
    last = a.size - 1
    beyond = j > last
    par = np.where((j - last) % 2 == 0, tail[0], tail[1])
    return np.where(beyond, par, a[np.minimum(j, last)])


def _antiderivative(v1: np.ndarray, h: float) -> np.ndarray:
    """V with (V_{j+1} - V_{j-1})/(2h) = v1_j, V even, V_0 = V_1 = 0."""
    V = np.zeros_like(v1)
    V[2::2] = 2.0 * h * np.cumsum(v1[1:-1:2])
    V[3::2] = 2.0 * h * np.cumsum(v1[2:-1:2])
    return V


def evolve_linear_radial3(state: FieldState, t: float) -> FieldState:
    """Free wave at time ``state.t + t`` from radial N = 3 data.

    ``t`` must be an integer multiple of the grid spacing. Data must stay
    inside the grid, i.e. support + |t| < r_max.
    """
    grid = _check_radial3(state)
    k = time_to_steps(t, grid)
    if k == 0:
        return state.replace()
    if support_radius(state) + abs(k) * grid.h >= grid.r_max - grid.h:
        raise TruncationError("the wave would leave the grid")
    h, r = grid.h, grid.r
    v0 = r * state.u
    v1 = r * state.ut
    V = _antiderivative(v1, h)
    tail = (V[-1], V[-2])  # v1 vanishes near r_max, so V is constant per parity beyond it
    i = np.arange(grid.n)
    ip, im = i + k, i - k
    # i+k and i-k share parity, so the two decoupled sublattices of V never mix
    v = 0.5 * (_odd_lookup(v0, ip) + _odd_lookup(v0, im))
    v += 0.5 * (_even_lookup(V, ip, tail) - _even_lookup(V, im, tail))
    dv0 = lambda j: (_odd_lookup(v0, j + 1) - _odd_lookup(v0, j - 1)) / (2.0 * h)
    vt = 0.5 * (dv0(ip) - dv0(im)) + 0.5 * (_odd_lookup(v1, ip) + _odd_lookup(v1, im))
    return FieldState(_from_v(v, r, h), _from_v(vt, r, h), grid, 3, t=state.t + k * h)


def _from_v(v: np.ndarray, r: np.ndarray, h: float) -> np.ndarray:
    u = np.empty_like(v)
    u[1:] = v[1:] / r[1:]
    u[0] = v[1] / h  # v is odd, so v(h)/h = v'(0) + O(h^2)
    return u


def linear_energy(state: FieldState) -> float:
    """4 pi sum w (v_r^2 + v_t^2) with centered v_r and trapezoid weights.

    For compactly supported data this equals int |grad u|^2 + u_t^2 up to
    O(h^2) and is conserved exactly by ``evolve_linear_radial3``.
    """
    grid = _check_radial3(state)
    h, r = grid.h, grid.r
    v = r * state.u
    vt = r * state.ut
    vr = np.empty_like(v)
    vr[1:-1] = (v[2:] - v[:-2]) / (2.0 * h)
    vr[0] = v[1] / h
    vr[-1] = (v[-1] - v[-2]) / h
    w = np.full(grid.n, h)
    w[0] = w[-1] = 0.5 * h
    return float(4.0 * math.pi * np.sum(w * (vr * vr + vt * vt)))


def _fit_inverse_t(t: np.ndarray, e: np.ndarray) -> tuple[float, float]:
    """Least squares E(t) = E_inf + B/t; returns (E_inf, B)."""
    a = np.column_stack([np.ones_like(t), 1.0 / t])
    coef, *_ = np.linalg.lstsq(a, e, rcond=None)
    return float(coef[0]), float(coef[1])


@dataclass
class EquipartitionReport:
    """Exterior energy E_out(t) = 1/2 int_{|x|>=|t|} (|grad u|^2 + u_t^2) in both time directions."""

    times: np.ndarray
    E_plus: np.ndarray
    E_minus: np.ndarray
    total: float
    grad_sq0: float
    dt_sq0: float
    asymptote_plus: float
    asymptote_minus: float
    tail_plus: float
    tail_minus: float
    plateau_plus: bool
    plateau_minus: bool
    monotone_plus: bool
    monotone_minus: bool
    t_horizon: float
    support: float

    dichotomy_rtol: float = 1e-3

    @property
    def dichotomy_ok(self) -> bool:
        """max(E_+, E_-) >= total/2 up to ``dichotomy_rtol`` (equality holds for (u0, 0) and (0, u1))."""
        return max(self.asymptote_plus, self.asymptote_minus) >= 0.5 * self.total * (1 - self.dichotomy_rtol)

    @property
    def sum_defect(self) -> float:
        """(E_+ + E_-)/total - 1; zero by the equipartition law."""
        return (self.asymptote_plus + self.asymptote_minus) / self.total - 1.0

    def to_dict(self) -> dict:
        return {
            "times": self.times.tolist(),
            "E_plus": self.E_plus.tolist(),
            "E_minus": self.E_minus.tolist(),
            "total": self.total,
            "grad_sq0": self.grad_sq0,
            "dt_sq0": self.dt_sq0,
            "asymptote_plus": self.asymptote_plus,
            "asymptote_minus": self.asymptote_minus,
            "tail_plus": self.tail_plus,
            "tail_minus": self.tail_minus,
            "plateau_plus": self.plateau_plus,
            "plateau_minus": self.plateau_minus,
            "monotone_plus": self.monotone_plus,
            "monotone_minus": self.monotone_minus,
            "dichotomy_ok": self.dichotomy_ok,
            "sum_defect": self.sum_defect,
            "t_horizon": self.t_horizon,
            "support": self.support,
        }


def _plateau(t: np.ndarray, e: np.ndarray, tol: float = 1e-6) -> bool:
    last = t >= 0.9 * t[-1]
    seg = e[last]
    scale = max(abs(seg[-1]), 1e-300)
    return bool((np.max(seg) - np.min(seg)) / scale < tol)


def equipartition_report(state: FieldState, t_horizon: float | None = None) -> EquipartitionReport:
    """Exterior energies for t in [0, t_horizon] and the limits as t grows.

    Once the data have cleared the cone, E_out(t) = E_inf + B/t exactly (the
    1/t part is the boundary term of v = r u at |x| = t), so the limits are
    read off by fitting that law on the late half of the series. ``plateau_*``
    additionally reports whether the raw series has settled by t_horizon.
    """
    grid = _check_radial3(state)
    supp = support_radius(state)
    if supp == 0.0:
        raise InvalidInput("data vanish identically")
    t_h = 4.0 * supp if t_horizon is None else float(t_horizon)
    if supp + t_h >= grid.r_max - grid.h:
        raise TruncationError(f"support {supp:.4g} + t_horizon {t_h:.4g} reaches r_max")
    k_max = int(math.floor(t_h / grid.h))
    ks = np.unique(np.linspace(0, k_max, _SERIES_SAMPLES + 1).round().astype(int))
    times = ks * grid.h
    e_plus = np.array([0.5 * exterior_energy(evolve_linear_radial3(state, k * grid.h), k * grid.h) for k in ks])
    e_minus = np.array(
        [0.5 * exterior_energy(evolve_linear_radial3(state, -k * grid.h), k * grid.h) for k in ks]
    )
    nm = norms(state)
    total = 0.5 * (nm.grad_sq + nm.dt_sq)
    late = times >= max(2.0 * supp, 0.5 * times[-1])
    a_p, b_p = _fit_inverse_t(times[late], e_plus[late])
    a_m, b_m = _fit_inverse_t(times[late], e_minus[late])
    slack = 1e-9 * total
    return EquipartitionReport(
        times=times,
        E_plus=e_plus,
        E_minus=e_minus,
        total=total,
        grad_sq0=nm.grad_sq,
        dt_sq0=nm.dt_sq,
        asymptote_plus=a_p,
        asymptote_minus=a_m,
        tail_plus=b_p,
        tail_minus=b_m,
        plateau_plus=_plateau(times, e_plus),
        plateau_minus=_plateau(times, e_minus),
        monotone_plus=bool(np.all(np.diff(e_plus) <= slack)),
        monotone_minus=bool(np.all(np.diff(e_minus) <= slack)),
        t_horizon=float(times[-1]),
        support=supp,
    )


def kirchhoff_probe(u0, t: float, x0, n_theta: int = 64, n_phi: int = 128) -> float:
    """Free wave with data (u0, 0) at (t, x0) from the spherical-mean formula.

    ``u0`` is a callable on points of shape (..., 3). The t-derivative of
    t * mean(u0 over the sphere |y - x0| = t) is taken by central differences.
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (3,):
        raise InvalidInput("x0 must be a point in R^3")
    t = float(t)
    if t == 0.0:
        return float(u0(x0[None, :])[0])
    mu, wmu = roots_legendre(n_theta)
    phi = 2.0 * math.pi * np.arange(n_phi) / n_phi
    st = np.sqrt(1.0 - mu * mu)
    dirs = np.stack(
        [st[:, None] * np.cos(phi)[None, :], st[:, None] * np.sin(phi)[None, :], np.repeat(mu[:, None], n_phi, 1)],
        axis=-1,
    )
    weights = (wmu[:, None] / 2.0) * np.full(n_phi, 1.0 / n_phi)[None, :]

    def tm(s: float) -> float:
        return s * float(np.sum(weights * u0(x0 + s * dirs)))

    d = 1e-4 * max(1.0, abs(t))
    return (tm(t + d) - tm(t - d)) / (2.0 * d)
