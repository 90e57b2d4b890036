"""Trajectory-level analyses: modulation tracking, blow-up profiles, velocity
estimates and sign monitoring of d_ell.

Also builds the energy-normalized data used to exercise them: states on the
level set E = E(W, 0) near the ground state.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import brentq

from .closed_forms import check_ell, exact_quantities, ground_state, ground_state_norms
from .errors import InvalidInput, InvalidParameter, UndefinedVelocity
from .fields import conserved_quantities, dl_functional, grad_sq_density, integrate
from .grids import FieldState, RadialGrid
from .modulation import fit
from .nonlinear import BlowupEstimate, SolverOptions, Trajectory, detect_blowup


def trajectory_from_states(times, states, blowup: bool = False) -> Trajectory:
    """Wrap externally built snapshots (e.g. closed-form families) as a Trajectory."""
    states = list(states)
    t = np.asarray(times, dtype=float)
    if len(states) != t.size or t.size == 0:
        raise InvalidInput("need one time per state")
    cq = [conserved_quantities(s) for s in states]
    e = np.array([c.E for c in cq])
    scale = max(abs(e[0]), 1e-300)
    amp = np.array([float(np.max(np.abs(s.u))) for s in states])
    return Trajectory(
        times=t,
        states=states,
        energy=e,
        drift=np.abs(e - e[0]) / scale,
        grad_sq=np.array([c.grad_sq for c in cq]),
        step_times=t[1:].copy(),
        step_max_abs=amp[1:],
        blowup=blowup,
        dt=float(t[1] - t[0]) if t.size > 1 else 0.0,
        options=SolverOptions(),
        backend="external",
        valid_radius=math.inf,
    )


@dataclass
class ModulationTrack:
    t: np.ndarray
    lam: np.ndarray
    center: np.ndarray
    alpha: np.ndarray
    dl: np.ndarray
    fits: list
    truncated: bool
    reason: str
    ell: float

    def derivatives(self) -> dict:
        """Forward differences of lam, center and alpha between consecutive fits."""
        if self.t.size < 2:
            z = np.zeros(0)
            return {"t_mid": z, "dlam": z, "dcenter": np.zeros((0, self.center.shape[1] if self.center.ndim == 2 else 0)), "dalpha": z}
        dt = np.diff(self.t)
        return {
            "t_mid": 0.5 * (self.t[1:] + self.t[:-1]),
            "dlam": np.diff(self.lam) / dt,
            "dcenter": np.diff(self.center, axis=0) / dt[:, None],
            "dalpha": np.diff(self.alpha) / dt,
        }

    @property
    def modulation_rate_constant(self) -> float:
        """max (|lam'| + |x' - ell e1| + lam|alpha'|) / max |d_ell| over the window."""
        d = self.derivatives()
        if d["dlam"].size == 0:
            return 0.0
        drift = d["dcenter"].copy()
        drift[:, 0] -= self.ell
        lam_mid = 0.5 * (self.lam[1:] + self.lam[:-1])
        rate = np.abs(d["dlam"]) + np.linalg.norm(drift, axis=1) + lam_mid * np.abs(d["dalpha"])
        dmax = float(np.max(np.abs(self.dl)))
        return float(np.max(rate)) / dmax if dmax > 0 else (0.0 if np.max(rate) == 0 else math.inf)

    def to_dict(self) -> dict:
        d = self.derivatives()
        return {
            "ell": self.ell,
            "t": self.t.tolist(),
            "lambda": self.lam.tolist(),
            "center": self.center.tolist(),
            "alpha": self.alpha.tolist(),
            "dl": self.dl.tolist(),
            "dlambda_dt": d["dlam"].tolist(),
            "dalpha_dt": d["dalpha"].tolist(),
            "modulation_rate_constant": self.modulation_rate_constant,
            "truncated": self.truncated,
            "reason": self.reason,
        }


def track_modulation(trajectory: Trajectory, ell: float = 0.0, delta0: float | None = None) -> ModulationTrack:
    """Fit every snapshot, seeding each fit with the previous one.

    The series stops at the first snapshot whose fit fails (basin exit or
    Newton failure); that snapshot is not included.
    """
    ell = check_ell(ell)
    ts, lams, centers, alphas, dls, fits = [], [], [], [], [], []
    guess = None
    reason = ""
    for t, st in zip(trajectory.times, trajectory.states):
        f = fit(st, ell, init_guess=guess, delta0=delta0)
        if not f.converged:
            reason = f"t = {float(t):.6g}: {f.reason}"
            break
        fits.append(f)
        ts.append(float(t))
        lams.append(f.lam)
        centers.append(f.center)
        alphas.append(f.alpha)
        dls.append(f.dl)
        guess = {"lam": f.lam, "center": np.asarray(f.center), "sign": f.sign}
    dim = trajectory.dim
    return ModulationTrack(
        t=np.asarray(ts),
        lam=np.asarray(lams),
        center=np.asarray(centers).reshape(-1, dim),
        alpha=np.asarray(alphas),
        dl=np.asarray(dls),
        fits=fits,
        truncated=bool(reason),
        reason=reason,
        ell=ell,
    )


def ell_from_conserved(state: FieldState, far_field: bool = True) -> np.ndarray:
    """Velocity -P/E from the conserved energy and momentum.

    The soliton tail carries O(1/L) of the energy outside a box of half-width
    L, so the integrals are far-field extrapolated by default.
    """
    cq = conserved_quantities(state, far_field=far_field)
    if not cq.E > 0:
        raise UndefinedVelocity(f"energy {cq.E:.6g} is not positive")
    return -np.asarray(cq.P, dtype=float) / cq.E


def _amplitude_lambda(state: FieldState) -> float:
    return float(np.max(np.abs(state.u))) ** (-2.0 / (state.dim - 2))


def _h1_distance_to_W(state: FieldState, lam: float) -> tuple[float, int]:
    """min over sign of the energy-space distance from the state to sign * W rescaled by lam."""
    dim = state.dim
    if not isinstance(state.grid, RadialGrid):
        raise InvalidInput("profile distances are computed on radial snapshots")
    W = lam ** (-0.5 * (dim - 2)) * ground_state(state.grid.r / lam, dim)
    best = (math.inf, 1)
    kin = integrate(state.ut**2, state.grid, dim)
    for sign in (1, -1):
        diff = FieldState(state.u - sign * W, np.zeros_like(W), state.grid, dim)
        d = math.sqrt(max(integrate(grad_sq_density(diff), state.grid, dim) + kin, 0.0))
        if d < best[0]:
            best = (d, sign)
    return best


@dataclass
class BlowupProfileReport:
    empty: bool
    T_estimate: float = math.nan
    confidence: float = math.nan
    T_source: str = ""
    t: list = field(default_factory=list)
    lam: list = field(default_factory=list)
    lambda_over_remaining: list = field(default_factory=list)
    h1_distance: list = field(default_factory=list)
    sign: list = field(default_factory=list)
    ell_estimate: list = field(default_factory=list)
    lambda_over_remaining_decreasing: bool = False
    h1_distance_trend: str = ""
    max_grad_sq_over_K: float = math.nan
    lambda_method: str = "amplitude"

    def to_dict(self) -> dict:
        return asdict(self)


def _trend(v: np.ndarray, rtol: float = 1e-9) -> str:
    if v.size < 2:
        return "undetermined"
    d = np.diff(v)
    tol = rtol * max(1.0, float(np.max(np.abs(v))))
    if np.all(np.abs(d) <= tol):
        return "flat"
    if np.all(d <= tol):
        return "decreasing"
    if np.all(d >= -tol):
        return "increasing"
    return "mixed"


def blowup_profile_report(
    trajectory: Trajectory, T_plus: float | None = None, window: float = 0.5
) -> BlowupProfileReport:
    """lam(t)/(T - t) and the distance to the rescaled ground state near blow-up.

    T is the numerical estimate from :func:`detect_blowup` unless ``T_plus``
    is given. Near blow-up the energy-space distance to the family is large,
    so lam(t) is taken from the amplitude, lam = max|u|^{-2/(N-2)}, which
    equals the modulation parameter on exact rescaled ground states.
    Snapshots in the last ``window`` fraction of [t_0, T) are reported.
    """
    est: BlowupEstimate | None = None
    if T_plus is None:
        est = detect_blowup(trajectory)
        if est is None:
            return BlowupProfileReport(empty=True)
        T, conf, src = est.T_estimate, est.confidence, "detect_blowup"
    else:
        T, conf, src = float(T_plus), 0.0, "given"
    t = np.asarray(trajectory.times)
    t0 = float(t[0])
    keep = (t < T) & (t >= t0 + (1.0 - window) * (T - t0))
    ts, lams, lor, dist, signs = [], [], [], [], []
    for ti, st in zip(t[keep], [s for s, k in zip(trajectory.states, keep) if k]):
        lam = _amplitude_lambda(st)
        d, sg = _h1_distance_to_W(st, lam)
        ts.append(float(ti))
        lams.append(lam)
        lor.append(lam / (T - float(ti)))
        dist.append(d)
        signs.append(sg)
    lor_a = np.asarray(lor)
    K = ground_state_norms(trajectory.dim).K
    return BlowupProfileReport(
        empty=False,
        T_estimate=float(T),
        confidence=float(conf),
        T_source=src,
        t=ts,
        lam=lams,
        lambda_over_remaining=lor,
        h1_distance=dist,
        sign=signs,
        ell_estimate=ell_from_conserved(trajectory.states[0]).tolist(),
        lambda_over_remaining_decreasing=bool(lor_a.size >= 2 and np.all(np.diff(lor_a) < 0)),
        h1_distance_trend=_trend(np.asarray(dist)),
        max_grad_sq_over_K=float(np.max(trajectory.grad_sq)) / K,
    )


@dataclass
class TrappingReport:
    applicable: bool
    t: list
    dl: list
    sign_changes: int
    energy_mismatch: float
    momentum_mismatch: float
    zero_tol: float
    reason: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def trapping_monitor(
    trajectory: Trajectory,
    ell: float = 0.0,
    norm_tol: float = 1e-4,
    zero_tol: float | None = None,
    far_field: bool = False,
) -> TrappingReport:
    """d_ell along the trajectory and the number of its sign changes.

    Applicable only when the initial energy and momentum match those of
    W_ell(0) to relative ``norm_tol``. Values with |d_ell| <= ``zero_tol``
    (default 1e-6 K, the quadrature scale) carry no sign and are skipped.
    """
    ell = check_ell(ell)
    dim = trajectory.dim
    K = ground_state_norms(dim).K
    zt = 1e-6 * K if zero_tol is None else float(zero_tol)
    ref = exact_quantities(ell, dim).scaled(K)
    st0 = trajectory.states[0]
    cq = conserved_quantities(st0, far_field=far_field)
    e_mis = abs(cq.E - ref["energy"]) / ref["energy"]
    p_ref = np.zeros(dim)
    p_ref[0] = ref["momentum_x1"]
    p_mis = float(np.linalg.norm(np.asarray(cq.P) - p_ref)) / ref["energy"]
    t = [float(v) for v in trajectory.times]
    if e_mis > norm_tol or p_mis > norm_tol:
        return TrappingReport(False, t, [], 0, e_mis, p_mis, zt, "energy/momentum off the normalization")
    dl = np.array([dl_functional(s, ell, far_field=far_field) for s in trajectory.states])
    signs = np.sign(dl[np.abs(dl) > zt])
    changes = int(np.count_nonzero(signs[1:] != signs[:-1])) if signs.size > 1 else 0
    return TrappingReport(True, t, dl.tolist(), changes, e_mis, p_mis, zt)


def _energy(u, ut, grid, dim, far_field):
    return conserved_quantities(FieldState(u, ut, grid, dim), far_field=far_field).E


def energy_matched_ground_state(
    grid: RadialGrid, amplitude: float, velocity_profile: np.ndarray, dim: int = 3, far_field: bool = True
) -> FieldState:
    """(a W, b g) with b >= 0 chosen so that the discrete energy equals that of (W, 0).

    Along the ray a -> E(a W, 0) the ground state is a strict maximum (the
    level equation has a double root at a = 1 and no other positive root),
    so a != 1 lowers the energy and the kinetic part b g makes up the
    difference exactly: E(a W, b g) = E(a W, 0) + b^2/2 int g^2.
    """
    if not amplitude > 0:
        raise InvalidParameter("amplitude must be positive")
    W = ground_state(grid.r, dim)
    g = np.asarray(velocity_profile, dtype=float)
    e_ref = _energy(W, np.zeros_like(W), grid, dim, far_field)
    e_a = _energy(amplitude * W, np.zeros_like(W), grid, dim, far_field)
    g2 = integrate(g * g, grid, dim, far_field)
    gap = e_ref - e_a
    if gap < 0 or not g2 > 0:
        raise InvalidParameter("cannot reach the ground-state energy with a kinetic correction")
    b = math.sqrt(2.0 * gap / g2)
    return FieldState(amplitude * W, b * g, grid, dim)


def energy_manifold_perturbation(
    grid: RadialGrid,
    eps: float,
    rng: np.random.Generator,
    branch: int = 1,
    dim: int = 3,
    far_field: bool = True,
) -> FieldState:
    """((1 + a) W + eps g0, eps g1) on the level set E = E(W, 0).

    g0, g1 are random sums of Gaussians drawn from ``rng``; g1 carries a
    fixed unit bump so that the kinetic energy dominates the quadratic form
    and two roots a of opposite sign exist. ``branch`` selects the root
    (+1: d_ell > 0 side, -1: d_ell < 0 side).
    """
    if branch not in (1, -1):
        raise InvalidParameter("branch must be +1 or -1")
    r = grid.r
    W = ground_state(r, dim)
    c = rng.normal(size=3)
    widths = rng.uniform(0.3, 3.0, size=3)
    g0 = sum(ci * np.exp(-(r / wi) ** 2) for ci, wi in zip(c, widths))
    g1 = rng.normal() * np.exp(-((r / rng.uniform(0.5, 2.0)) ** 2)) + 2.0 * np.exp(-((r - 1.0) ** 2))
    e_ref = _energy(W, np.zeros_like(W), grid, dim, far_field)

    def gap(a):
        return _energy((1.0 + a) * W + eps * g0, eps * g1, grid, dim, far_field) - e_ref

    if not gap(0.0) > 0:
        raise InvalidParameter("perturbation does not raise the energy; draw again")
    lo, hi = (0.0, 0.5) if branch > 0 else (-0.5, 0.0)
    a = brentq(gap, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return FieldState((1.0 + a) * W + eps * g0, eps * g1, grid, dim)


def perturbation_family(grid: RadialGrid, sizes, seed: int, dim: int = 3) -> list[tuple[float, int, FieldState]]:
    """Both energy-normalized branches for every size, drawn reproducibly from ``seed``."""
    ss = np.random.SeedSequence(seed)
    out = []
    for eps, child in zip(sizes, ss.spawn(len(sizes))):
        rng = np.random.Generator(np.random.Philox(child))
        while True:
            state = rng.bit_generator.state
            try:
                pair = []
                for branch in (1, -1):
                    rng.bit_generator.state = state
                    pair.append((float(eps), branch, energy_manifold_perturbation(grid, eps, rng, branch, dim)))
                out.extend(pair)
                break
            except (InvalidParameter, ValueError):
                rng.bit_generator.state = state
                rng.normal(size=16)  # advance and redraw
    return out
