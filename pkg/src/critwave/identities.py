"""Virial-type identities and monotonicity functionals along trajectories.

Each identity has the form d/dt F(u) = R(u) (or d^2/dt^2 for identity 5).
Traces compare the centered time difference of F over stored snapshots with
R evaluated at the middle snapshot; the gap is O(h^2 + dt_snap^2).

Radial integrands use the finite-volume |grad u|^2 density shared with the
energy, and the centered nodal u_r for mixed terms.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .closed_forms import check_ell, ground_state_norms
from .errors import InvalidInput, InvalidParameter, TruncationWarning, Unsupported
from .fields import (
    conserved_quantities,
    dl_functional,
    energy_density,
    first_moment_energy,
    grad_sq_density,
    gradient_components,
    integrate,
    momentum,
    potential_density,
    radial_derivative,
)
from .grids import BoxGrid3D, FieldState, RadialGrid

IDENTITY_IDS = ("1", "2", "3", "4", "1'", "2'", "3'", "4'", "5")
_ALIASES = {f"identity{k}": k for k in IDENTITY_IDS}
_ALIASES.update({k.replace("'", "p"): k for k in IDENTITY_IDS})


def canonical_identity(identity_id) -> str:
    key = str(identity_id).strip()
    key = _ALIASES.get(key, key)
    if key not in IDENTITY_IDS:
        raise InvalidInput(f"unknown identity {identity_id!r}; expected one of {IDENTITY_IDS}")
    return key


@dataclass(frozen=True)
class Cutoff:
    """Radial cutoff, 1 on [0, r1] and 0 beyond r2, with a C^2 quintic ramp."""

    r1: float
    r2: float

    def __post_init__(self):
        if not 0.0 <= self.r1 < self.r2:
            raise InvalidParameter("cutoff needs 0 <= r1 < r2")

    def _s(self, r):
        return np.clip((np.asarray(r, dtype=float) - self.r1) / (self.r2 - self.r1), 0.0, 1.0)

    def value(self, r):
        s = self._s(r)
        return 1.0 - s**3 * (10.0 - 15.0 * s + 6.0 * s * s)

    def derivative(self, r):
        s = self._s(r)
        return -30.0 * s * s * (1.0 - s) ** 2 / (self.r2 - self.r1)


@dataclass
class IdentityTrace:
    identity_id: str
    t: np.ndarray
    lhs_dt: np.ndarray
    rhs: np.ndarray

    @property
    def gap(self) -> np.ndarray:
        return self.lhs_dt - self.rhs

    @property
    def max_abs_gap(self) -> float:
        return float(np.max(np.abs(self.gap))) if self.gap.size else 0.0

    def rows(self) -> list[tuple[float, float, float, float]]:
        return [(float(a), float(b), float(c), float(d)) for a, b, c, d in zip(self.t, self.lhs_dt, self.rhs, self.gap)]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "lhs_dt", "rhs", "gap"])
            for row in self.rows():
                w.writerow([repr(v) for v in row])

    def to_dict(self) -> dict:
        return {
            "identity_id": self.identity_id,
            "max_abs_gap": self.max_abs_gap,
            "t": self.t.tolist(),
            "lhs_dt": self.lhs_dt.tolist(),
            "rhs": self.rhs.tolist(),
        }


def _first_derivative(t: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Three-point centered first derivative, second order on non-uniform spacing."""
    h1 = t[1:-1] - t[:-2]
    h2 = t[2:] - t[1:-1]
    return (h1 * h1 * f[2:] + (h2 * h2 - h1 * h1) * f[1:-1] - h2 * h2 * f[:-2]) / (h1 * h2 * (h1 + h2))


def _second_derivative(t: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Three-point second difference valid on non-uniform spacing."""
    h1 = t[1:-1] - t[:-2]
    h2 = t[2:] - t[1:-1]
    return 2.0 * (h1 * f[2:] - (h1 + h2) * f[1:-1] + h2 * f[:-2]) / (h1 * h2 * (h1 + h2))


class _Radial:
    """Nodal ingredients of the radial integrands for one snapshot."""

    def __init__(self, state: FieldState, far_field: bool):
        self.s = state
        self.g = state.grid
        self.n = state.dim
        self.r = self.g.r
        self.ur = radial_derivative(state.u, self.g)
        self.grad = grad_sq_density(state)
        self.pot = potential_density(state)
        self.ff = far_field

    def I(self, f) -> float:
        return integrate(f, self.g, self.n, self.ff)


def _functional(ident: str, st: _Radial, cutoff: Cutoff | None, energy0: float):
    s, n, r = st.s, st.n, st.r
    u, ut = s.u, s.ut
    if ident == "1'":
        return st.I(u * ut), st.I(ut * ut - st.grad + st.pot)
    if ident == "2'":
        # radial form of int x_k d_k u u_t and int (d_k u)^2
        lhs = st.I(r * st.ur * ut) / n
        rhs = 0.5 * st.I(-ut * ut + st.grad - (n - 2) / n * st.pot) - st.I(st.grad) / n
        return lhs, rhs
    if ident == "3'":
        lhs = st.I(r * st.ur * ut)
        rhs = -0.5 * n * st.I(ut * ut) + 0.5 * (n - 2) * (st.I(st.grad) - st.I(st.pot))
        return lhs, rhs
    if ident == "4'":
        return float(first_moment_energy(s)[0]), -float(momentum(s)[0])
    if ident == "5":
        return st.I(u * u), (
            4.0 / (n - 2) * st.I(st.grad) + 4.0 * (n - 1) / (n - 2) * st.I(ut * ut) - 4.0 * n / (n - 2) * energy0
        )
    phi = cutoff.value(r)
    dphi = cutoff.derivative(r)
    if ident == "1":
        return st.I(phi * u * ut), st.I((ut * ut - st.grad + st.pot) * phi) - st.I(u * st.ur * dphi)
    if ident == "2":
        # phi radial: both integrands are odd in x_k
        return 0.0, 0.0
    if ident == "3":
        # Phi = phi(r) x: div Phi = N phi + r phi', d_j Phi_k d_k u d_j u = u_r^2 (phi + r phi')
        lhs = st.I(phi * r * st.ur * ut)
        div = n * phi + r * dphi
        rhs = 0.5 * st.I((-ut * ut + st.grad - (n - 2) / n * st.pot) * div) - st.I(st.grad * (phi + r * dphi))
        return lhs, rhs
    if ident == "4":
        return st.I(phi * energy_density(s)), -st.I(dphi * st.ur * ut)
    raise InvalidInput(ident)


def identity_trace(trajectory, identity_id, cutoff: Cutoff | None = None, far_field: bool = False) -> IdentityTrace:
    """Compare d/dt of the identity's functional with its right-hand side.

    Unprimed identities need ``cutoff``. Primed ones assume compact support;
    for trajectories carrying boundary data a TruncationWarning is issued
    unless ``far_field`` integration is requested.
    """
    ident = canonical_identity(identity_id)
    states = trajectory.states
    if not isinstance(states[0].grid, RadialGrid):
        raise Unsupported("identity traces run on radial trajectories")
    if len(states) < 3:
        raise InvalidInput("need at least three snapshots")
    primed = ident.endswith("'") or ident == "5"
    if not primed and cutoff is None:
        raise InvalidInput(f"identity {ident} needs a cutoff")
    if primed and trajectory.valid_radius < states[0].grid.r_max and not far_field:
        warnings.warn("primed identity on data reaching the boundary", TruncationWarning)
    t = np.asarray(trajectory.times, dtype=float)
    energy0 = float(trajectory.energy[0])
    vals = [_functional(ident, _Radial(s, far_field), cutoff, energy0) for s in states]
    f = np.array([v[0] for v in vals])
    rhs = np.array([v[1] for v in vals])
    lhs = _second_derivative(t, f) if ident == "5" else _first_derivative(t, f)
    return IdentityTrace(ident, t[1:-1], lhs, rhs[1:-1])


@dataclass
class PhiSeries:
    t: np.ndarray
    phi: np.ndarray
    dl: np.ndarray
    dphi_dt: np.ndarray
    energy_offset: float

    @property
    def gap(self) -> np.ndarray:
        """dPhi/dt - d_ell, which vanishes on the energy normalization."""
        return self.dphi_dt - self.dl[1:-1]

    @property
    def corrected_gap(self) -> np.ndarray:
        """dPhi/dt - (d_ell + K - N E), valid at any energy."""
        return self.dphi_dt - self.dl[1:-1] - self.energy_offset

    def to_dict(self) -> dict:
        return {
            "t": self.t.tolist(),
            "phi": self.phi.tolist(),
            "dl": self.dl.tolist(),
            "dphi_dt": self.dphi_dt.tolist(),
            "energy_offset": self.energy_offset,
            "max_abs_gap": float(np.max(np.abs(self.gap))) if self.gap.size else 0.0,
            "max_abs_corrected_gap": float(np.max(np.abs(self.corrected_gap))) if self.gap.size else 0.0,
        }


def phi_functional(trajectory, ell: float = 0.0, t_end: float = 1.0, far_field: bool = False) -> PhiSeries:
    """Phi(t) = (N-2) int (x + (t_end - t) ell e1).grad u u_t + (N-2)(N-1)/2 int u u_t.

    Radial trajectories carry zero momentum, so only ell = 0 applies. In
    general Phi' = |grad u|^2 + |u_t|^2 - N E, which equals d_0 exactly when
    E = E(W, 0); the difference K - N E is reported as ``energy_offset``.
    """
    check_ell(ell)
    if ell != 0.0:
        raise InvalidParameter("radial trajectories need ell = 0")
    states = trajectory.states
    n = states[0].dim
    t = np.asarray(trajectory.times, dtype=float)
    phi, dl = [], []
    for s in states:
        st = _Radial(s, far_field)
        virial = st.I(st.r * st.ur * s.ut)
        phi.append((n - 2) * virial + 0.5 * (n - 2) * (n - 1) * st.I(s.u * s.ut))
        dl.append(dl_functional(s, 0.0, far_field=far_field))
    phi = np.asarray(phi)
    K = ground_state_norms(n).K
    e0 = conserved_quantities(states[0], far_field).E if far_field else float(trajectory.energy[0])
    offset = K - n * e0
    return PhiSeries(t, phi, np.asarray(dl), _first_derivative(t, phi), offset)


@dataclass(frozen=True)
class ZSValues:
    Z: float
    S: np.ndarray
    annihilation: float

    def to_dict(self) -> dict:
        return {"Z": self.Z, "S": [float(v) for v in self.S], "annihilation": self.annihilation}


def zs_functionals(state: FieldState, ell: float, t: float, t_ref: float = 1.0, far_field: bool = False) -> ZSValues:
    """Z(t), S(t) and int (u_t + ell d_1 u)^2 on a box-grid state.

    S(t) = int (x + (t_ref - t) ell e1) e(u); Z is the virial combination
    whose derivative is int (u_t + ell d_1 u)^2 under the momentum
    normalization.
    """
    ell = check_ell(ell)
    if not isinstance(state.grid, BoxGrid3D):
        raise Unsupported("Z and S are evaluated on box grids")
    g = state.grid
    n = 3
    x1, x2, x3 = g.coords
    d1, d2, d3 = gradient_components(state)
    ut, u = state.ut, state.u
    shift = ell * (t_ref - t)
    I = lambda f: integrate(f, g, n, far_field)
    xgrad = (x1 + shift) * d1 + x2 * d2 + x3 * d3
    Z = (
        (ell * ell - 1.0) * I(xgrad * ut)
        + 0.5 * (n - 2) * (ell * ell - 1.0) * I(u * ut)
        - ell * ell * I((x1 + shift) * d1 * ut)
    )
    e = energy_density(state)
    S = np.array([I((x1 + shift) * e), I(x2 * e), I(x3 * e)])
    ann = I((ut + ell * d1) ** 2)
    return ZSValues(float(Z), S, float(ann))


def pohozaev_check(dim: int) -> float:
    """(int |grad W|^2 - int W^{2N/(N-2)}) / int |grad W|^2."""
    g = ground_state_norms(dim)
    return (g.K - g.potential) / g.K
