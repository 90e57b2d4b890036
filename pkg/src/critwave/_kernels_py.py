"""Pure-numpy velocity-Verlet stepping; the fallback for the compiled kernel."""

from __future__ import annotations

import numpy as np


def _nonlinear(u: np.ndarray, dim: int) -> np.ndarray:
    if dim == 3:
        u2 = u * u
        return u2 * u2 * u
    if dim == 4:
        return u * u * u
    return np.power(np.abs(u), 4.0 / (dim - 2)) * u


def acceleration(u, inv_mu, stiff, dim: int) -> np.ndarray:
    """u_tt of the semi-discrete system at the current state."""
    flux = stiff * (u[1:] - u[:-1])
    acc = np.empty_like(u)
    acc[0] = flux[0] * inv_mu[0] + _nonlinear(u[:1], dim)[0]
    acc[1:-1] = (flux[1:] - flux[:-1]) * inv_mu[1:-1] + _nonlinear(u[1:-1], dim)
    acc[-1] = 0.0
    return acc


def verlet_run(u, ut, inv_mu, stiff, dim: int, dt: float, nsteps: int, u_cap: float, max_abs):
    """Advance (u, ut) in place by up to ``nsteps`` steps of size ``dt``.

    Returns ``(steps_done, status)`` with the same codes as the compiled kernel.
    """
    hdt = 0.5 * dt
    acc = acceleration(u, inv_mu, stiff, dim)
    for k in range(nsteps):
        u_prev, ut_prev = u.copy(), ut.copy()
        ut += hdt * acc
        u += dt * ut
        acc = acceleration(u, inv_mu, stiff, dim)
        ut += hdt * acc
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(ut))):
            u[:] = u_prev
            ut[:] = ut_prev
            return k, 2
        m = float(np.max(np.abs(u)))
        max_abs[k] = m
        if m > u_cap:
            return k + 1, 1
    return nsteps, 0
