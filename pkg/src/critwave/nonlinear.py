"""Radial time integration of u_tt = Lap u + |u|^{4/(N-2)} u.

The spatial operator is the finite-volume radial Laplacian: node ``i``
carries the shell mass ``mu_i`` and neighbouring nodes are coupled by the
flux ``r_{i+1/2}^{N-1} (u_{i+1} - u_i)/h``. At the origin this reduces to
``u_tt = 2N (u_1 - u_0)/h^2 + ...``, the discrete form of
``Lap u(0) = N u''(0)`` for an even profile. The outer node is held at its
initial value. The resulting semi-discrete energy is exactly the quadrature
energy of :mod:`critwave.fields`, and velocity Verlet keeps it conserved up
to O(dt^2) with exact time-reversal symmetry.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _backend
from .errors import (
    InvalidInput,
    InvalidParameter,
    NumericFailure,
    TruncationError,
    Undetermined,
    Unsupported,
)
from .fields import conserved_quantities
from .grids import BoxGrid3D, FieldState, RadialGrid, check_dim

# Nodes at the outer edge that must stay quiet for compactly supported data.
_GUARD_NODES = 3
_GUARD_TOL = 1e-10


@dataclass(frozen=True)
class SolverOptions:
    cfl_safety: float = 0.5
    u_cap: float | None = None
    drift_tol: float = 1e-6
    snapshot_stride: int = 10
    backend: str | None = None

    def __post_init__(self):
        if not 0.0 < self.cfl_safety <= 0.9:
            raise InvalidParameter("cfl_safety must lie in (0, 0.9]")
        if self.u_cap is not None and not self.u_cap > 0:
            raise InvalidParameter("u_cap must be positive")
        if not self.drift_tol > 0:
            raise InvalidParameter("drift_tol must be positive")
        if int(self.snapshot_stride) != self.snapshot_stride or self.snapshot_stride < 1:
            raise InvalidParameter("snapshot_stride must be a positive integer")
        if self.backend is not None and self.backend not in ("python", "cython"):
            raise InvalidParameter(f"unknown backend {self.backend!r}")


def cfl_dt(grid, options: SolverOptions | None = None) -> float:
    opts = options or SolverOptions()
    return opts.cfl_safety * grid.h


def support_radius(state: FieldState) -> float:
    """Largest radius where u or u_t is nonzero (0 for the zero state)."""
    nz = np.flatnonzero((state.u != 0.0) | (state.ut != 0.0))
    return float(state.grid.r[nz[-1]]) if nz.size else 0.0


def discrete_operators(grid: RadialGrid, dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Inverse shell masses and half-node stiffness of the radial scheme."""
    return 1.0 / grid.cell_volumes(dim), grid.half_weights(dim) / grid.h


@dataclass
class Trajectory:
    """Snapshots of one evolution plus per-step amplitude and solver events.

    Snapshot times run monotonically in the direction of integration.
    """

    times: np.ndarray
    states: list
    energy: np.ndarray
    drift: np.ndarray
    grad_sq: np.ndarray
    step_times: np.ndarray
    step_max_abs: np.ndarray
    blowup: bool
    dt: float
    options: SolverOptions
    backend: str
    valid_radius: float
    events: list = field(default_factory=list)

    @property
    def grid(self):
        return self.states[0].grid

    @property
    def dim(self) -> int:
        return self.states[0].dim

    @property
    def final_state(self) -> FieldState:
        return self.states[-1]

    @property
    def snapshots(self) -> list:
        return list(zip(self.times.tolist(), self.states))

    @property
    def max_drift(self) -> float:
        return float(np.max(self.drift))

    def series(self) -> dict:
        """Per-snapshot scalar series for export."""
        return {
            "t": self.times.tolist(),
            "energy": self.energy.tolist(),
            "drift": self.drift.tolist(),
            "grad_sq": self.grad_sq.tolist(),
            "max_abs_u": [float(np.max(np.abs(s.u))) for s in self.states],
        }


def _energy_scale(e0: float, grad_sq: float, dt_sq: float) -> float:
    pos = 0.5 * (grad_sq + dt_sq)
    return abs(e0) if abs(e0) > 1e-12 * pos else max(pos, 1e-300)


def evolve(state0: FieldState, T: float, options: SolverOptions | None = None) -> Trajectory:
    """Integrate from ``state0.t`` to ``state0.t + T`` (T may be negative).

    The step is the largest dt <= cfl_dt that divides T into a whole number
    of snapshot strides. Compactly supported data must satisfy
    support + |T| + 2h < r_max; for
    data reaching r_max (W-like tails) the boundary influence is confined to
    r > r_max - |T|, reported as ``valid_radius``.
    """
    opts = options or SolverOptions()
    if not isinstance(state0.grid, RadialGrid):
        raise Unsupported("dynamic evolution runs on radial grids only")
    grid, dim = state0.grid, state0.dim
    T = float(T)
    if not math.isfinite(T):
        raise InvalidParameter("T must be finite")

    supp = support_radius(state0)
    compact = supp < grid.r_max - _GUARD_NODES * grid.h
    events = []
    if compact:
        if supp + abs(T) + 2.0 * grid.h >= grid.r_max:
            raise TruncationError(
                f"support {supp:.4g} + |T| {abs(T):.4g} reaches r_max {grid.r_max:.4g}"
            )
        valid_radius = grid.r_max
    else:
        if abs(T) >= grid.r_max:
            raise TruncationError("|T| exceeds r_max for data reaching the boundary")
        valid_radius = grid.r_max - abs(T)
        events.append({"type": "boundary-data", "valid_radius": valid_radius})

    kern = _backend.kernels if opts.backend is None else _backend.available_backends()[opts.backend]
    backend = _backend.BACKEND if opts.backend is None else opts.backend
    # whole strides only, so that snapshots are equally spaced in time
    stride = opts.snapshot_stride
    nsteps = 0 if T == 0.0 else stride * int(math.ceil(abs(T) / (stride * cfl_dt(grid, opts)) - 1e-9))
    dt = T / nsteps if nsteps else 0.0
    peak0 = float(np.max(np.abs(state0.u)))
    u_cap = opts.u_cap if opts.u_cap is not None else (1e3 * peak0 if peak0 > 0 else math.inf)
    inv_mu, stiff = discrete_operators(grid, dim)
    guard_scale = max(peak0, float(np.max(np.abs(state0.ut))), 1e-300)

    u, ut = state0.u.copy(), state0.ut.copy()
    t0 = state0.t
    cq0 = conserved_quantities(state0)
    scale = _energy_scale(cq0.E, cq0.grad_sq, cq0.dt_sq)
    times, states, energy, drift, grad = [t0], [state0], [cq0.E], [0.0], [cq0.grad_sq]
    step_t, step_m = [], []
    blowup = False
    k = 0
    while k < nsteps:
        chunk = min(opts.snapshot_stride, nsteps - k)
        buf = np.empty(chunk)
        done, status = kern.verlet_run(u, ut, inv_mu, stiff, dim, dt, chunk, u_cap, buf)
        step_t.extend(t0 + (k + 1 + np.arange(done)) * dt)
        step_m.extend(buf[:done])
        k += done
        t = t0 + k * dt
        if status == 2:
            raise NumericFailure(f"non-finite values at t = {t + dt:.6g}")
        snap = FieldState(u.copy(), ut.copy(), grid, dim, t=t)
        cq = conserved_quantities(snap)
        times.append(t)
        states.append(snap)
        energy.append(cq.E)
        drift.append(abs(cq.E - cq0.E) / scale)
        grad.append(cq.grad_sq)
        if compact:
            edge = max(np.max(np.abs(u[-_GUARD_NODES:])), np.max(np.abs(ut[-_GUARD_NODES:])))
            if edge > _GUARD_TOL * guard_scale:
                raise TruncationError(f"solution reached the outer boundary at t = {t:.6g}")
        if status == 1:
            blowup = True
            events.append({"type": "blowup", "t": t, "max_abs_u": float(buf[done - 1])})
            break

    drift_arr = np.asarray(drift)
    if np.max(drift_arr) > opts.drift_tol:
        events.append({"type": "drift", "max_drift": float(np.max(drift_arr))})
    return Trajectory(
        times=np.asarray(times),
        states=states,
        energy=np.asarray(energy),
        drift=drift_arr,
        grad_sq=np.asarray(grad),
        step_times=np.asarray(step_t, dtype=float),
        step_max_abs=np.asarray(step_m, dtype=float),
        blowup=blowup,
        dt=dt,
        options=opts,
        backend=backend,
        valid_radius=valid_radius,
        events=events,
    )


@dataclass(frozen=True)
class BlowupEstimate:
    T_estimate: float
    confidence: float
    slope: float
    crossing_times: tuple
    thresholds: tuple
    drift_ok: bool

    def to_dict(self) -> dict:
        return {
            "T_estimate": self.T_estimate,
            "confidence": self.confidence,
            "slope": self.slope,
            "crossing_times": list(self.crossing_times),
            "thresholds": list(self.thresholds),
            "drift_ok": self.drift_ok,
        }


def fit_blowup_time(
    times, max_abs, dim: int, ratio_range: tuple = (2.0, 16.0), base: float | None = None
) -> tuple[float, float, float, np.ndarray, np.ndarray]:
    """Fit max|u|^{-2/(N-2)} = c (T - t) through threshold crossings.

    Thresholds are ``base * 2^{j/2}`` within ``ratio_range``; crossing times
    are interpolated linearly in the transformed amplitude. Returns
    ``(T, relative_rms_residual, c, crossing_times, thresholds)``.
    """
    check_dim(dim)
    t = np.asarray(times, dtype=float)
    m = np.asarray(max_abs, dtype=float)
    if t.size < 2:
        raise Undetermined("amplitude series too short")
    base = float(m[0]) if base is None else float(base)
    if not base > 0:
        raise Undetermined("initial amplitude must be positive")
    expo = -2.0 / (dim - 2)
    j_lo = math.ceil(2.0 * math.log2(ratio_range[0]) - 1e-12)
    j_hi = math.floor(2.0 * math.log2(ratio_range[1]) + 1e-12)
    crossings, levels = [], []
    running = np.maximum.accumulate(m)
    for j in range(j_lo, j_hi + 1):
        lev = base * 2.0 ** (j / 2.0)
        idx = np.flatnonzero(running >= lev)
        if idx.size == 0:
            break
        i = idx[0]
        if i == 0:
            continue
        y0, y1, yl = m[i - 1] ** expo, m[i] ** expo, lev**expo
        s = (y0 - yl) / (y0 - y1) if y0 != y1 else 1.0
        crossings.append(t[i - 1] + s * (t[i] - t[i - 1]))
        levels.append(lev)
    if len(crossings) < 4:
        raise Undetermined(f"only {len(crossings)} threshold crossings (need 4)")
    tc = np.asarray(crossings)
    y = np.asarray(levels) ** expo
    slope, intercept = np.polyfit(tc, y, 1)
    if not slope < 0:
        raise Undetermined("amplitude is not growing at a self-similar rate")
    T = -intercept / slope
    resid = y - (slope * tc + intercept)
    conf = float(np.sqrt(np.mean(resid**2)) / np.max(np.abs(y)))
    return float(T), conf, float(-slope), tc, np.asarray(levels)


def detect_blowup(trajectory: Trajectory, ratio_range: tuple = (2.0, 16.0)) -> BlowupEstimate | None:
    """Estimate the blow-up time of a flagged run; None for bounded runs.

    ``drift_ok`` requires the energy drift to stay within tolerance for all
    snapshots taken before the first fitted crossing, where the solution is
    still resolved; growth that violates it points to a numerical instability.
    """
    if not trajectory.blowup:
        return None
    base = float(np.max(np.abs(trajectory.states[0].u)))
    t_all = np.concatenate(([trajectory.times[0]], trajectory.step_times))
    m_all = np.concatenate(([base], trajectory.step_max_abs))
    T, conf, slope, tc, lev = fit_blowup_time(t_all, m_all, trajectory.dim, ratio_range, base)
    before = trajectory.times <= tc[0]
    drift_ok = bool(np.all(trajectory.drift[before] <= trajectory.options.drift_tol))
    return BlowupEstimate(T, conf, slope, tuple(tc.tolist()), tuple(lev.tolist()), drift_ok)


# Checkpoint layout: magic, grid kind, dimension, reserved, extent, count, time.
_HEADER = struct.Struct("<4sBBHdQd")
_MAGIC = b"CWV1"
_KINDS = {"radial": 0, "box": 1}


def save_checkpoint(state: FieldState, path) -> None:
    g = state.grid
    if isinstance(g, RadialGrid):
        kind, extent, count = 0, g.r_max, g.n
    else:
        kind, extent, count = 1, g.half_width, g.m
    header = _HEADER.pack(_MAGIC, kind, state.dim, 0, extent, count, state.t)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(state.u, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(state.ut, dtype="<f8").tobytes())


def load_checkpoint(path) -> FieldState:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise InvalidInput("checkpoint too short")
    magic, kind, dim, _, extent, count, t = _HEADER.unpack_from(data)
    if magic != _MAGIC:
        raise InvalidInput(f"bad checkpoint magic {magic!r}")
    if kind == 0:
        grid = RadialGrid(extent, int(count))
    elif kind == 1:
        grid = BoxGrid3D(extent, int(count))
    else:
        raise InvalidInput(f"unknown grid kind {kind}")
    size = int(np.prod(grid.shape))
    body = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
    if body.size != 2 * size:
        raise InvalidInput("checkpoint payload does not match its header")
    u = body[:size].reshape(grid.shape).astype(float)
    ut = body[size:].reshape(grid.shape).astype(float)
    return FieldState(u, ut, grid, int(dim), t=float(t))
