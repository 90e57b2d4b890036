import math

import numpy as np
import pytest

from critwave.errors import InvalidInput, InvalidTime, TruncationError, Unsupported
from critwave.grids import FieldState, RadialGrid
from critwave.linear import (
    equipartition_report,
    evolve_linear_radial3,
    kirchhoff_probe,
    linear_energy,
    time_to_steps,
)


def bump(r, a=1.0, R=1.0):
    return a * np.clip(1.0 - (r / R) ** 2, 0.0, None) ** 4


def state(u0=True, u1=False, n=1201, r_max=6.0):
    g = RadialGrid(r_max, n)
    z = np.zeros(n)
    return FieldState(bump(g.r) if u0 else z, bump(g.r, 0.5, 1.5) if u1 else z, g, 3)


def test_time_to_steps():
    g = RadialGrid(6.0, 1201)
    assert time_to_steps(1.0, g) == 200
    assert time_to_steps(-0.5, g) == -100
    with pytest.raises(InvalidTime):
        time_to_steps(0.0123, g)


def test_dalembert_matches_analytic_formula_at_nodes():
    s = state()
    r = s.grid.r
    t = 1.5
    out = evolve_linear_radial3(s, t)
    v0 = lambda x: x * bump(np.abs(x))  # odd extension of r u0
    ref = (v0(r + t) + v0(r - t)) / 2
    np.testing.assert_allclose(out.u[1:], ref[1:] / r[1:], rtol=0, atol=1e-13)
    assert out.t == pytest.approx(t)


def test_agrees_with_kirchhoff_formula():
    s = state(n=4801)
    u0 = lambda x: bump(np.linalg.norm(x, axis=-1))
    for t, x0 in ((0.5, (0.3, 0.0, 0.0)), (1.25, (0.0, 0.4, 0.2)), (2.0, (1.0, 0.5, 0.5))):
        out = evolve_linear_radial3(s, t)
        r = np.linalg.norm(x0)
        grid_val = np.interp(r, s.grid.r, out.u)
        assert grid_val == pytest.approx(kirchhoff_probe(u0, t, x0), abs=2e-5)


def test_kirchhoff_at_t0_returns_data():
    u0 = lambda x: np.exp(-np.sum(x * x, axis=-1))
    assert kirchhoff_probe(u0, 0.0, (0.5, 0, 0)) == pytest.approx(math.exp(-0.25))
    with pytest.raises(InvalidInput):
        kirchhoff_probe(u0, 1.0, (0.0, 0.0))


@pytest.mark.parametrize("u0,u1", [(True, False), (False, True), (True, True)])
def test_linear_energy_exactly_conserved(u0, u1):
    s = state(u0, u1)
    e0 = linear_energy(s)
    for t in (0.25, 1.0, 2.5, -2.0):
        assert linear_energy(evolve_linear_radial3(s, t)) == pytest.approx(e0, rel=1e-12)


def test_forward_backward_is_identity():
    s = state(True, True)
    back = evolve_linear_radial3(evolve_linear_radial3(s, 2.0), -2.0)
    np.testing.assert_allclose(back.u[1:], s.u[1:], atol=1e-12)
    # the origin value is rebuilt from v(h)/h, which is second order
    assert abs(back.u[0] - s.u[0]) <= 10 * s.grid.h**2
    np.testing.assert_allclose(back.ut[1:], s.ut[1:], atol=1e-12)
    assert abs(back.ut[0] - s.ut[0]) <= 10 * s.grid.h**2


def test_zero_time_copy():
    s = state()
    out = evolve_linear_radial3(s, 0.0)
    np.testing.assert_array_equal(out.u, s.u)


def test_rejections():
    s = state()
    with pytest.raises(TruncationError):
        evolve_linear_radial3(s, 5.5)
    g = RadialGrid(6.0, 1201)
    with pytest.raises(Unsupported):
        evolve_linear_radial3(FieldState(bump(g.r), np.zeros(g.n), g, 5), 1.0)
    with pytest.raises(InvalidInput):
        equipartition_report(FieldState(np.zeros(g.n), np.zeros(g.n), g, 3))
    with pytest.raises(TruncationError):
        equipartition_report(s, t_horizon=5.5)


def test_equipartition_u0_case():
    s = state(n=2401, r_max=6.0)
    rep = equipartition_report(s)
    assert rep.monotone_plus and rep.monotone_minus
    assert rep.E_plus[-1] / rep.grad_sq0 == pytest.approx(0.25, abs=1e-3)
    assert rep.asymptote_plus / rep.grad_sq0 == pytest.approx(0.25, abs=1e-3)
    assert rep.dichotomy_ok
    d = rep.to_dict()
    assert d["t_horizon"] == pytest.approx(4 * rep.support, abs=s.grid.h)
    assert d["monotone_plus"] is True


def test_equipartition_u1_tail_is_captured_by_fit():
    # The kinetic case carries a B/t tail: the raw value at 4R is still far
    # from 1/4 while the fitted limit is close to it.
    s = state(False, True, n=2401, r_max=8.0)
    rep = equipartition_report(s)
    raw = rep.E_plus[-1] / rep.dt_sq0
    assert abs(raw - 0.25) > 1e-2
    assert rep.asymptote_plus / rep.dt_sq0 == pytest.approx(0.25, abs=2e-3)
    assert rep.tail_plus > 0


def test_equipartition_sum_law_generic():
    s = state(True, True, n=2401, r_max=10.0)
    rep = equipartition_report(s, t_horizon=8.0)
    assert rep.sum_defect < 2e-3
