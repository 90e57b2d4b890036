# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
# cython: language_level=3
"""Compiled velocity-Verlet stepping for the radial semilinear wave equation.

Mirrors ``_kernels_py`` operation by operation so both backends agree to
roundoff.
"""

from libc.math cimport fabs, pow, isfinite
from libc.string cimport memcpy

import numpy as np


cdef inline double _nonlinear(double ui, int dim, double power) noexcept nogil:
    cdef double u2
    if dim == 3:
        u2 = ui * ui
        return u2 * u2 * ui
    if dim == 4:
        return ui * ui * ui
    return pow(fabs(ui), power) * ui


cdef void _accel(const double[::1] u, double[::1] acc, const double[::1] inv_mu,
                 const double[::1] stiff, int dim, double power) noexcept nogil:
    cdef Py_ssize_t i, n = u.shape[0]
    cdef double fl, fl_prev = 0.0
    for i in range(n - 1):
        fl = stiff[i] * (u[i + 1] - u[i])
        acc[i] = (fl - fl_prev) * inv_mu[i] + _nonlinear(u[i], dim, power)
        fl_prev = fl
    acc[n - 1] = 0.0


def acceleration(double[::1] u, double[::1] inv_mu, double[::1] stiff, int dim):
    """u_tt of the semi-discrete system at the current state."""
    out = np.empty(u.shape[0])
    cdef double[::1] acc = out
    _accel(u, acc, inv_mu, stiff, dim, 4.0 / (dim - 2))
    return out


def verlet_run(double[::1] u, double[::1] ut, double[::1] inv_mu, double[::1] stiff,
               int dim, double dt, Py_ssize_t nsteps, double u_cap, double[::1] max_abs):
    """Advance (u, ut) in place by up to ``nsteps`` steps of size ``dt``.

    Returns ``(steps_done, status)``: status 0 finished, 1 max|u| exceeded
    ``u_cap`` (state kept), 2 non-finite values (state rolled back one step).
    """
    cdef Py_ssize_t n = u.shape[0], i, k
    cdef double hdt = 0.5 * dt, m, a
    cdef double power = 4.0 / (dim - 2)
    cdef bint bad
    cdef Py_ssize_t done = nsteps
    cdef int status = 0
    acc_arr = np.empty(n)
    u_prev_arr = np.empty(n)
    ut_prev_arr = np.empty(n)
    cdef double[::1] acc = acc_arr, u_prev = u_prev_arr, ut_prev = ut_prev_arr
    with nogil:
        _accel(u, acc, inv_mu, stiff, dim, power)
        for k in range(nsteps):
            memcpy(&u_prev[0], &u[0], n * sizeof(double))
            memcpy(&ut_prev[0], &ut[0], n * sizeof(double))
            for i in range(n):
                ut[i] = ut[i] + hdt * acc[i]
                u[i] = u[i] + dt * ut[i]
            _accel(u, acc, inv_mu, stiff, dim, power)
            m = 0.0
            bad = False
            for i in range(n):
                ut[i] = ut[i] + hdt * acc[i]
                a = fabs(u[i])
                if not (isfinite(a) and isfinite(ut[i])):
                    bad = True
                elif a > m:
                    m = a
            if bad:
                memcpy(&u[0], &u_prev[0], n * sizeof(double))
                memcpy(&ut[0], &ut_prev[0], n * sizeof(double))
                done, status = k, 2
                break
            max_abs[k] = m
            if m > u_cap:
                done, status = k + 1, 1
                break
    return done, status
