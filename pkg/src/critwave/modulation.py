"""Modulation of states near the boosted soliton family.

A state u close to the family is written as

    lambda^{(N-2)/2} u(lambda x + X) = sign (1 + alpha) W_ell(0, x) + f(x)

with the unboosted remainder f~(y) = f(sqrt(1-ell^2) y_1, y_bar) orthogonal in
H^1-dot to the translations d_j W and to the scaling generator
Lambda W = (N-2)/2 W + x.grad W. The W-direction is absorbed by alpha.

All H^1-dot products are evaluated as <v, Z> = int v (-Lap Z) with the
closed-form -Lap of each kernel element, and pulled back through the boost
so that no interpolation of the field is needed. Subtracting the model from
the field before integrating cancels the truncation bias of the box, so an
exact family member has residuals that vanish to roundoff.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate as sp_integrate
from scipy.ndimage import map_coordinates

from .closed_forms import check_ell, ground_state, ground_state_dr, ground_state_norms, scaling_generator
from .errors import InvalidParameter, Unsupported
from .fields import box_gradient, dl_functional, grad_sq_density, integrate, quadrature_weights
from .grids import BoxGrid3D, FieldState, RadialGrid, sphere_area

DELTA0_FRACTION = 0.1
ORTHO_TOL_FRACTION = 1e-9
MAX_ITER = 50
FD_STEP = 1e-6


def _m(dim: int) -> float:
    return 0.5 * (dim - 2)


def _p(dim: int) -> float:
    return (dim + 2) / (dim - 2)


def _kernel_fields(y: np.ndarray, dim: int, with_translations: bool = True):
    """W, -Lap W, and (-Lap) of the N + 1 modulation directions at points y (..., N)."""
    rho2 = np.sum(y * y, axis=-1)
    s = 1.0 + rho2 / (dim * (dim - 2))
    w = s ** (-_m(dim))
    p = _p(dim)
    wp1 = w ** (p - 1.0)
    lap_w = w * wp1  # W^p
    radial = -(s ** (-0.5 * dim)) / dim  # W'(r)/r
    lam_w = _m(dim) * w + rho2 * radial
    out = []
    if with_translations:
        out = [p * wp1 * radial * y[..., j] for j in range(dim)]
    out.append(p * wp1 * lam_w)
    return w, lap_w, out


@lru_cache(maxsize=None)
def kernel_norms(dim: int) -> dict:
    """|d_1 W|^2 and |Lambda W|^2 in H^1-dot, by radial quadrature."""
    p = _p(dim)
    om = sphere_area(dim)

    def quad(f):
        val = 0.0
        for lo, hi in ((0, 1), (1, 10), (10, 100), (100, np.inf)):
            val += sp_integrate.quad(f, lo, hi, epsabs=0, epsrel=1e-12, limit=400)[0]
        return om * val

    dx1 = quad(lambda r: p * ground_state(r, dim) ** (p - 1) * ground_state_dr(r, dim) ** 2 * r ** (dim - 1)) / dim
    lam = quad(lambda r: p * ground_state(r, dim) ** (p - 1) * scaling_generator(r, dim) ** 2 * r ** (dim - 1))
    return {"dx1": dx1, "lambda": lam}


def _gamma(ell: float) -> float:
    return math.sqrt(1.0 - ell * ell)


def _box_points(grid: BoxGrid3D) -> np.ndarray:
    return grid.points()


def _unboosted_coords(grid, ell: float, lam: float, center, dim: int) -> np.ndarray:
    """y = (S^{-1} x - S^{-1} X)/lam for every grid point x, S = diag(gamma, 1, ..)."""
    g = _gamma(ell)
    c = np.asarray(center, dtype=float)
    if isinstance(grid, RadialGrid):
        y = np.zeros((grid.n, dim))
        y[:, 0] = grid.r / lam
        return y
    x = _box_points(grid)
    y = x - c
    y[..., 0] /= g
    return y / lam


@dataclass(frozen=True)
class _Projection:
    alpha: float
    residuals: np.ndarray
    model: np.ndarray


def _project(state: FieldState, ell: float, lam: float, center, sign: int) -> _Projection:
    dim = state.dim
    radial = state.is_radial
    g = _gamma(ell)
    y = _unboosted_coords(state.grid, ell, lam, center, dim)
    w, lap_w, lap_z = _kernel_fields(y, dim, with_translations=not radial)
    scale_u = lam ** (-_m(dim))
    scale_lap = lam ** (-_m(dim) - 2.0)
    model = sign * scale_u * w
    weights = quadrature_weights(state.grid, dim) / g
    K = ground_state_norms(dim).K
    diff = state.u - model
    alpha = float(np.sum(weights * diff * (sign * scale_lap * lap_w))) / K
    rem = diff - alpha * model
    res = np.array([float(np.sum(weights * rem * (scale_lap * z))) for z in lap_z])
    if radial:
        res = np.concatenate((np.zeros(dim), res))
    return _Projection(alpha, res, model)


def ortho_residuals(state: FieldState, lam: float, center=None, ell: float = 0.0, sign: int = 1) -> np.ndarray:
    """H^1-dot products of the unboosted, rescaled field with d_1 W..d_N W, Lambda W.

    Equivalent to <lam^{(N-2)/2} u~(lam . + X~), Z> with u~ the unboosted
    field and X~ = (X_1/gamma, X_bar). The fitted model is subtracted first,
    which leaves the continuum values unchanged. Radial states are symmetric,
    so their translation residuals are zero.
    """
    ell = check_ell(ell)
    if not lam > 0:
        raise InvalidParameter("lam must be positive")
    center = np.zeros(state.dim) if center is None else np.asarray(center, dtype=float)
    return _project(state, ell, lam, center, sign).residuals


@dataclass
class ModulationFit:
    lam: float
    center: list
    alpha: float
    sign: int
    ell: float
    residual_f_norm: float
    ortho_residuals: list
    converged: bool
    iterations: int
    dl: float
    u1_tilde_norm: float
    alpha_direction_norm: float
    reason: str = ""
    ortho_tol: float = field(default=0.0)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _grad_norm(field_u: np.ndarray, grid, dim: int) -> float:
    tmp = FieldState(field_u, np.zeros_like(field_u), grid, dim)
    if isinstance(grid, RadialGrid):
        val = integrate(grad_sq_density(tmp), grid, dim, far_field=True)
    else:
        gx, gy, gz = box_gradient(field_u, grid.h)
        val = integrate(gx * gx + gy * gy + gz * gz, grid, 3, far_field=True)
    return math.sqrt(max(val, 0.0))


def _u1_tilde_norm(state: FieldState, ell: float) -> float:
    """|| u_t + ell d_1 u ||_{L^2}."""
    if state.is_radial:
        return math.sqrt(max(integrate(state.ut**2, state.grid, state.dim, far_field=True), 0.0))
    d1 = box_gradient(state.u, state.grid.h)[0]
    v = state.ut + ell * d1
    return math.sqrt(max(integrate(v * v, state.grid, 3, far_field=True), 0.0))


def initial_guess(state: FieldState, ell: float = 0.0) -> dict:
    """lam from the peak amplitude, center at the peak, sign of the peak value."""
    dim = state.dim
    i = int(np.argmax(np.abs(state.u)))
    peak = float(state.u.flat[i])
    lam = abs(peak) ** (-2.0 / (dim - 2)) if peak != 0 else 1.0
    if state.is_radial:
        center = np.zeros(dim)
    else:
        center = _box_points(state.grid).reshape(-1, 3)[i].copy()
    return {"lam": lam, "center": center, "sign": 1 if peak >= 0 else -1}


def fit(
    state: FieldState,
    ell: float = 0.0,
    init_guess: dict | None = None,
    delta0: float | None = None,
    ortho_tol: float | None = None,
    max_iter: int = MAX_ITER,
) -> ModulationFit:
    """Newton iteration on the orthogonality conditions in (log lam, X~).

    Returns converged = False (with the best iterate) if the state lies
    outside the basin |d_ell| <= delta0, or Newton fails to bring every
    residual below ``ortho_tol`` within ``max_iter`` iterations.
    """
    ell = check_ell(ell)
    dim = state.dim
    if not state.is_radial and not isinstance(state.grid, BoxGrid3D):
        raise Unsupported(f"unknown grid {state.grid!r}")
    if state.is_radial and ell != 0.0:
        raise InvalidParameter("radial states can only be fit with ell = 0")
    K = ground_state_norms(dim).K
    delta0 = DELTA0_FRACTION * K if delta0 is None else float(delta0)
    tol = ORTHO_TOL_FRACTION * K if ortho_tol is None else float(ortho_tol)
    guess = initial_guess(state, ell)
    if init_guess:
        guess.update({k: v for k, v in init_guess.items() if v is not None})
    sign = int(guess["sign"])
    g = _gamma(ell)
    center = np.asarray(guess["center"], dtype=float)
    # unknowns: log lam, then the unboosted center
    x = np.concatenate(([math.log(float(guess["lam"]))], center / np.r_[g, np.ones(dim - 1)]))
    free = slice(0, 1) if state.is_radial else slice(0, dim + 1)
    rows = [dim] if state.is_radial else list(range(dim + 1))

    def unpack(v):
        c = v[1:] * np.r_[g, np.ones(dim - 1)]
        return math.exp(v[0]), c

    def resid(v):
        lam, c = unpack(v)
        pr = _project(state, ell, lam, c, sign)
        return pr, pr.residuals[rows]

    dl = dl_functional(state, ell, far_field=True)
    pr, r = resid(x)
    best = (np.max(np.abs(r)), x.copy(), pr)
    it = 0
    reason = ""
    converged = False
    if abs(dl) > delta0:
        reason = f"outside basin: |d_ell| = {abs(dl):.4g} > delta0 = {delta0:.4g}"
    else:
        while it < max_iter:
            if np.max(np.abs(r)) <= tol:
                converged = True
                break
            it += 1
            nfree = len(rows)
            jac = np.empty((nfree, nfree))
            for k in range(nfree):
                xp = x.copy()
                xp[k] += FD_STEP
                jac[:, k] = (resid(xp)[1] - r) / FD_STEP
            try:
                step = np.linalg.solve(jac, -r)
            except np.linalg.LinAlgError:
                reason = "singular Jacobian"
                break
            t = 1.0
            norm0 = np.linalg.norm(r)
            while True:
                xn = x.copy()
                xn[free] += t * step
                prn, rn = resid(xn)
                if np.linalg.norm(rn) < norm0 or t < 1e-4:
                    break
                t *= 0.5
            if np.linalg.norm(rn) >= norm0 and t < 1e-4:
                reason = "line search stalled"
                break
            x, pr, r = xn, prn, rn
            if np.max(np.abs(r)) < best[0]:
                best = (np.max(np.abs(r)), x.copy(), pr)
        else:
            reason = f"no convergence in {max_iter} iterations"
        if converged:
            best = (np.max(np.abs(r)), x.copy(), pr)
    _, xb, pb = best
    lam, c = unpack(xb)
    # sign consistent with the W-projection
    if 1.0 + pb.alpha < 0:
        sign = -sign
        pb = _project(state, ell, lam, c, sign)
    f_field = state.u - (1.0 + pb.alpha) * pb.model
    return ModulationFit(
        lam=float(lam),
        center=[float(v) for v in c],
        alpha=float(pb.alpha),
        sign=sign,
        ell=ell,
        residual_f_norm=_grad_norm(f_field, state.grid, dim),
        ortho_residuals=[float(v) for v in pb.residuals],
        converged=bool(converged),
        iterations=it,
        dl=float(dl),
        u1_tilde_norm=_u1_tilde_norm(state, ell),
        alpha_direction_norm=_grad_norm(state.u - pb.model, state.grid, dim),
        reason=reason,
        ortho_tol=tol,
    )


def unboost(state: FieldState, ell: float) -> FieldState:
    """(u~, u~_1) with u~(x) = u(gamma x_1, x_bar), u~_1 = (u_t + ell d_1 u)(gamma x_1, x_bar).

    Resampled by cubic spline interpolation on the same box.
    """
    ell = check_ell(ell)
    if not isinstance(state.grid, BoxGrid3D):
        raise Unsupported("unboost acts on box-grid states")
    if ell == 0.0:
        return state.replace()
    grid = state.grid
    g = _gamma(ell)
    d1 = box_gradient(state.u, grid.h)[0]
    u1 = state.ut + ell * d1
    idx = _index_coords(grid, scale_x1=g)
    return state.replace(u=_resample(state.u, idx), ut=_resample(u1, idx))


def boost(state_tilde: FieldState, ell: float) -> FieldState:
    """Inverse of :func:`unboost`; points mapped outside the box take the nearest value."""
    ell = check_ell(ell)
    if not isinstance(state_tilde.grid, BoxGrid3D):
        raise Unsupported("boost acts on box-grid states")
    if ell == 0.0:
        return state_tilde.replace()
    grid = state_tilde.grid
    g = _gamma(ell)
    idx = _index_coords(grid, scale_x1=1.0 / g)
    u = _resample(state_tilde.u, idx)
    u1 = _resample(state_tilde.ut, idx)
    d1 = box_gradient(u, grid.h)[0]
    return state_tilde.replace(u=u, ut=u1 - ell * d1)


def _index_coords(grid: BoxGrid3D, scale_x1: float) -> np.ndarray:
    """Fractional indices of the points (scale_x1 * x_1, x_2, x_3)."""
    m, L, h = grid.m, grid.half_width, grid.h
    i = np.arange(m, dtype=float)
    x1 = (scale_x1 * (-L + i * h) + L) / h
    ii, jj, kk = np.meshgrid(x1, i, i, indexing="ij")
    return np.stack([ii, jj, kk])


def _resample(f: np.ndarray, idx: np.ndarray) -> np.ndarray:
    return map_coordinates(f, idx, order=3, mode="nearest")


@dataclass
class EstimateReport:
    ratio_alpha: list
    ratio_alpha_direction: list
    ratio_remainder: list
    ratio_band: list
    normalized_ratio_alpha: list
    normalized_ratio_alpha_direction: list
    normalized_ratio_remainder: list
    normalized_band: list
    excluded: int
    K: float

    @property
    def C_required(self) -> float:
        """Smallest C with every ratio in [1/C, C]."""
        lo, hi = self.ratio_band
        return max(hi, 1.0 / lo) if lo > 0 else math.inf

    @property
    def C_required_normalized(self) -> float:
        lo, hi = self.normalized_band
        return max(hi, 1.0 / lo) if lo > 0 else math.inf

    def to_dict(self) -> dict:
        d = asdict(self)
        d["C_required"] = self.C_required
        d["C_required_normalized"] = self.C_required_normalized
        return d


def estimate_report(fits, dl_values=None, dim: int | None = None) -> EstimateReport:
    """Comparability ratios of alpha, grad(alpha W_ell + f) and the remainder against d_ell.

    Raw ratios are |alpha|/|d|, ||grad(alpha W_ell + f)||/|d| and
    (||grad f|| + ||u_t + ell d_1 u||)/|d|. The normalized ratios measure d
    in units of K and the H^1-dot norms in units of sqrt(K), which removes
    the dimension-dependent size of W. Rows with |d| < 1e-12 are excluded.
    """
    fits = list(fits)
    dls = [f.dl for f in fits] if dl_values is None else list(dl_values)
    if len(dls) != len(fits):
        raise InvalidParameter("one d_ell value per fit")
    if any(not f.converged for f in fits):
        raise InvalidParameter("all fits must have converged")
    if dim is None:
        dim = 3
    K = ground_state_norms(dim).K
    ra, rd, rr, na, nd, nr = [], [], [], [], [], []
    excluded = 0
    for f, d in zip(fits, dls):
        if abs(d) < 1e-12:
            excluded += 1
            continue
        ad = abs(d)
        ra.append(abs(f.alpha) / ad)
        rd.append(f.alpha_direction_norm / ad)
        rr.append((f.residual_f_norm + f.u1_tilde_norm) / ad)
        na.append(abs(f.alpha) / (ad / K))
        nd.append(f.alpha_direction_norm / math.sqrt(K) / (ad / K))
        nr.append((f.residual_f_norm + f.u1_tilde_norm) / math.sqrt(K) / (ad / K))
    raw = ra + rd + rr
    norm = na + nd + nr
    band = [min(raw), max(raw)] if raw else [math.nan, math.nan]
    nband = [min(norm), max(norm)] if norm else [math.nan, math.nan]
    return EstimateReport(ra, rd, rr, band, na, nd, nr, nband, excluded, K)
