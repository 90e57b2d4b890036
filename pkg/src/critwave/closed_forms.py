"""Closed-form ground state W, its Lorentz boosts W_ell, and their exact norms.

All derivatives are written out by hand so that residual checks measure
formula errors rather than discretization error.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import comb, sqrt

import numpy as np
from scipy import integrate

from .errors import InvalidParameter, NumericFailure, Unsupported
from .grids import BoxGrid3D, FieldState, RadialGrid, check_dim, sphere_area

ELL_LIMIT = 1.0 - 1e-9


def check_ell(ell: float) -> float:
    ell = float(ell)
    if not abs(ell) < ELL_LIMIT:
        raise InvalidParameter(f"|ell| must be < 1 (got {ell})")
    return ell


def critical_exponent(dim: int) -> float:
    """2N/(N-2), the exponent of the potential energy."""
    return 2.0 * dim / (dim - 2)


def nonlinear_power(dim: int) -> float:
    """4/(N-2), so that the nonlinearity reads |u|^p u."""
    return 4.0 / (dim - 2)


def _a(dim: int) -> float:
    return float(dim * (dim - 2))


def ground_state(r, dim: int):
    """W as a function of the radius."""
    r = np.asarray(r, dtype=float)
    return (1.0 + r * r / _a(dim)) ** (-(dim - 2) / 2)


def ground_state_dr(r, dim: int):
    r = np.asarray(r, dtype=float)
    return -(r / dim) * (1.0 + r * r / _a(dim)) ** (-dim / 2)


def ground_state_drr(r, dim: int):
    r = np.asarray(r, dtype=float)
    s = 1.0 + r * r / _a(dim)
    return -(s ** (-dim / 2)) / dim + r * r * s ** (-dim / 2 - 1) / _a(dim)


def scaling_generator(r, dim: int):
    """(N-2)/2 W + x.grad W, the generator of the scaling symmetry."""
    return 0.5 * (dim - 2) * ground_state(r, dim) + np.asarray(r) * ground_state_dr(r, dim)


def eval_W(x, dim: int):
    """Evaluate W at points ``x`` with trailing axis of length ``dim``."""
    check_dim(dim)
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != dim:
        raise InvalidParameter(f"points must have {dim} components")
    r2 = np.sum(x * x, axis=-1)
    return (1.0 + r2 / _a(dim)) ** (-(dim - 2) / 2)


@dataclass(frozen=True)
class SolitonParams:
    """One member of the family +-lam^{-(N-2)/2} W_ell(t/lam, (x-center)/lam)."""

    ell: float = 0.0
    lam: float = 1.0
    center: tuple = None
    sign: int = 1
    dim: int = 3

    def __post_init__(self):
        check_dim(self.dim)
        check_ell(self.ell)
        if not self.lam > 0:
            raise InvalidParameter("lam must be positive")
        if self.sign not in (1, -1):
            raise InvalidParameter("sign must be +1 or -1")
        c = np.zeros(self.dim) if self.center is None else np.asarray(self.center, float)
        if c.shape != (self.dim,):
            raise InvalidParameter(f"center must have {self.dim} components")
        object.__setattr__(self, "center", tuple(float(v) for v in c))


@dataclass
class SolitonJet:
    """Value and derivatives of W_ell at sample points (unit scale, unit sign)."""

    value: np.ndarray
    dt: np.ndarray
    grad: np.ndarray
    dtt: np.ndarray
    lap: np.ndarray

    @property
    def dx1(self) -> np.ndarray:
        return self.grad[..., 0]


def soliton_jet(t, x, ell: float, dim: int) -> SolitonJet:
    """W_ell(t, x) and its first/second derivatives at points ``x`` (..., dim)."""
    check_dim(dim)
    ell = check_ell(ell)
    x = np.asarray(x, dtype=float)
    gamma2 = 1.0 - ell * ell
    a = _a(dim)
    m = 0.5 * (dim - 2)
    xi = x[..., 0] - t * ell
    xbar2 = np.sum(x[..., 1:] ** 2, axis=-1)
    q = xi * xi / gamma2 + xbar2
    s = 1.0 + q / a
    w = s ** (-m)
    wq = -m * s ** (-m - 1) / a
    wqq = m * (m + 1) * s ** (-m - 2) / (a * a)

    qx = np.empty(x.shape)
    qx[..., 0] = 2.0 * xi / gamma2
    qx[..., 1:] = 2.0 * x[..., 1:]
    qt = -2.0 * ell * xi / gamma2

    grad = wq[..., None] * qx
    dt = wq * qt
    dtt = wqq * qt * qt + wq * (2.0 * ell * ell / gamma2)
    lap = wqq * np.sum(qx * qx, axis=-1) + wq * (2.0 / gamma2 + 2.0 * (dim - 1))
    return SolitonJet(w, dt, grad, dtt, lap)


def _scaled_points(t, x, params: SolitonParams):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != params.dim:
        raise InvalidParameter(f"points must have {params.dim} components")
    return t / params.lam, (x - np.asarray(params.center)) / params.lam


def eval_soliton(t, x, params: SolitonParams) -> tuple[np.ndarray, np.ndarray]:
    """(u, du/dt) of the family member at time ``t`` and points ``x``."""
    ts, xs = _scaled_points(t, x, params)
    jet = soliton_jet(ts, xs, params.ell, params.dim)
    lam, n = params.lam, params.dim
    u = params.sign * lam ** (-(n - 2) / 2) * jet.value
    ut = params.sign * lam ** (-n / 2) * jet.dt
    return u, ut


def pde_residual(t, x, params: SolitonParams):
    """u_tt - Lap u - |u|^{4/(N-2)} u for the family member, from closed forms."""
    ts, xs = _scaled_points(t, x, params)
    jet = soliton_jet(ts, xs, params.ell, params.dim)
    n = params.dim
    w = jet.value
    res = jet.dtt - jet.lap - np.abs(w) ** nonlinear_power(n) * w
    return params.sign * params.lam ** (-(n - 2) / 2 - 2) * res


def sample_soliton(t: float, params: SolitonParams, grid) -> FieldState:
    """Sample the family member at time ``t`` on a radial or box grid."""
    if isinstance(grid, RadialGrid):
        if params.ell != 0.0 or any(c != 0.0 for c in params.center):
            raise Unsupported("radial grids only carry centered, unboosted members")
        pts = np.zeros((grid.n, params.dim))
        pts[:, 0] = grid.r
    elif isinstance(grid, BoxGrid3D):
        if params.dim != 3:
            raise Unsupported("box grids are three-dimensional")
        pts = grid.points()
    else:
        raise Unsupported(f"unknown grid {grid!r}")
    u, ut = eval_soliton(t, pts, params)
    return FieldState(u, ut, grid, params.dim, t=float(t))


@dataclass(frozen=True)
class ExactQuantities:
    """Norms of W_ell(0) as multiples of the ground-state quantities."""

    ell: float
    dim: int
    grad_norm_ratio: float
    dt_norm_ratio: float
    energy_ratio: float
    momentum_over_energy: float

    def scaled(self, K: float) -> dict:
        """Absolute values given K = int |grad W|^2."""
        energy = self.energy_ratio * K / self.dim
        return {
            "grad_sq": self.grad_norm_ratio * K,
            "dt_sq": self.dt_norm_ratio * K,
            "energy": energy,
            "momentum_x1": self.momentum_over_energy * energy,
        }


def exact_quantities(ell: float, dim: int) -> ExactQuantities:
    check_dim(dim)
    ell = check_ell(ell)
    g = sqrt(1.0 - ell * ell)
    n = dim
    return ExactQuantities(
        ell=ell,
        dim=n,
        grad_norm_ratio=(n + (1 - n) * ell * ell) / (n * g),
        dt_norm_ratio=ell * ell / (n * g),
        energy_ratio=1.0 / g,
        momentum_over_energy=-ell,
    )


@dataclass(frozen=True)
class GroundStateNorms:
    dim: int
    K: float
    potential: float
    energy_W: float
    sobolev_C: float
    quadrature_agreement: float = field(default=0.0)


def _tail_series(dim: int, R: float, shift: int) -> float:
    """sum_k binom(-N, k) a^k R^{-(shift+2k)} / (shift+2k)."""
    a = _a(dim)
    total, k = 0.0, 0
    while True:
        coef = (-1) ** k * comb(dim + k - 1, k) * a**k
        term = coef * R ** (-(shift + 2 * k)) / (shift + 2 * k)
        total += term
        if abs(term) < 1e-18 * abs(total) or k > 200:
            return total
        k += 1


def _radial_quad(fun, R: float) -> float:
    pts = [0.0] + [2.0**j for j in range(0, 12) if 2.0**j < R] + [R]
    total = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        val, _ = integrate.quad(fun, lo, hi, epsabs=0.0, epsrel=1e-13, limit=400)
        total += val
    return total


def _grad_sq_integral(dim: int, R: float) -> float:
    om = sphere_area(dim)
    inner = _radial_quad(lambda r: ground_state_dr(r, dim) ** 2 * r ** (dim - 1), R)
    tail = _a(dim) ** dim / dim**2 * _tail_series(dim, R, dim - 2)
    return om * (inner + tail)


def _potential_integral(dim: int, R: float) -> float:
    om = sphere_area(dim)
    p = critical_exponent(dim)
    inner = _radial_quad(lambda r: ground_state(r, dim) ** p * r ** (dim - 1), R)
    tail = _a(dim) ** dim * _tail_series(dim, R, dim)
    return om * (inner + tail)


@lru_cache(maxsize=None)
def ground_state_norms(dim: int) -> GroundStateNorms:
    """K = int |grad W|^2 by adaptive quadrature plus an analytic far-field series.

    Two cut radii must agree to 1e-9 relative, otherwise NumericFailure.
    """
    check_dim(dim)
    k1, k2 = _grad_sq_integral(dim, 60.0), _grad_sq_integral(dim, 120.0)
    p1, p2 = _potential_integral(dim, 60.0), _potential_integral(dim, 120.0)
    agree = max(abs(k1 - k2) / k2, abs(p1 - p2) / p2)
    if not agree <= 1e-9:
        raise NumericFailure(f"ground-state quadrature disagreement {agree:.3e}")
    return GroundStateNorms(
        dim=dim,
        K=k2,
        potential=p2,
        energy_W=k2 / dim,
        sobolev_C=k2 ** (-1.0 / dim),
        quadrature_agreement=agree,
    )


def energy_W(dim: int) -> float:
    return ground_state_norms(dim).energy_W


def reduced_soliton_integrals(ell: float, dim: int, n_mu: int = 48) -> dict:
    """int |grad W_ell(0)|^2, int (d_t W_ell(0))^2, E and P_1 without a grid.

    W_ell(0) is axially symmetric about e1, so in spherical coordinates with
    mu = cos(angle to e1) every integral reduces to
    omega_{N-2} int_{-1}^{1} (1 - mu^2)^{(N-3)/2} int_0^inf f r^{N-1} dr dmu.
    The mu integral uses Gauss-Legendre nodes and the r integral adaptive
    quadrature of the closed-form jet.
    """
    check_dim(dim)
    ell = check_ell(ell)
    mu, wmu = np.polynomial.legendre.leggauss(n_mu)
    p = critical_exponent(dim)
    sn = np.sqrt(1.0 - mu * mu)
    ang = wmu * sn ** (dim - 3)
    dirs = np.zeros((n_mu, dim))
    dirs[:, 0] = mu
    dirs[:, 1] = sn

    def pieces(r):
        jet = soliton_jet(0.0, r * dirs, ell, dim)
        g2 = np.sum(jet.grad**2, axis=-1)
        rows = np.stack([g2, jet.dt**2, np.abs(jet.value) ** p, jet.dt * jet.dx1])
        return (rows @ ang) * r ** (dim - 1)

    out = np.zeros(4)
    for lo, hi in ((0.0, 1.0), (1.0, 8.0), (8.0, 64.0), (64.0, np.inf)):
        out += integrate.quad_vec(pieces, lo, hi, epsabs=0.0, epsrel=1e-12, limit=400)[0]
    grad_sq, dt_sq, pot, p1 = sphere_area(dim - 1) * out
    energy = 0.5 * (grad_sq + dt_sq) - pot / p
    return {"grad_sq": grad_sq, "dt_sq": dt_sq, "potential": pot, "energy": energy, "momentum_x1": p1}
