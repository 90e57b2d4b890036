import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from critwave.closed_forms import (
    SolitonParams,
    eval_soliton,
    eval_W,
    exact_quantities,
    ground_state_norms,
    pde_residual,
    reduced_soliton_integrals,
    sample_soliton,
    soliton_jet,
)
from critwave.errors import InvalidParameter, Unsupported
from critwave.grids import BoxGrid3D, RadialGrid

# Independent 30-digit mpmath quadrature of omega_{N-1} int r^{N-1} W'(r)^2 dr, frozen.
K_ORACLE = {3: 12.820992204969126836, 4: 105.27578027828649193, 5: 844.36026476273855969}


def test_eval_W_examples():
    assert eval_W(np.zeros(3), 3) == 1.0
    assert eval_W(np.array([1.0, 1.0, 1.0]), 3) == pytest.approx(2**-0.5, rel=1e-12)
    x = np.zeros(5)
    x[0] = math.sqrt(15.0)
    assert eval_W(x, 5) == pytest.approx(2**-1.5, rel=1e-12)


def test_boosted_value_at_origin():
    u, _ = eval_soliton(0.0, np.zeros((1, 3)), SolitonParams(ell=0.5))
    assert u[0] == pytest.approx(1.0)


@pytest.mark.parametrize("ell", [1.0, -1.0, 1.5, 1 - 1e-10])
def test_ell_rejected(ell):
    with pytest.raises(InvalidParameter):
        SolitonParams(ell=ell)
    with pytest.raises(InvalidParameter):
        exact_quantities(ell, 3)


@pytest.mark.parametrize("bad", [dict(lam=0.0), dict(lam=-1.0), dict(sign=0), dict(dim=6), dict(center=(0.0, 0.0))])
def test_params_validation(bad):
    with pytest.raises(InvalidParameter):
        SolitonParams(**bad)


def _symbolic_soliton(dim):
    t, ell = sp.symbols("t ell", real=True)
    xs = sp.symbols(f"x1:{dim + 1}", real=True)
    a = dim * (dim - 2)
    m = sp.Rational(dim - 2, 2)
    q = (xs[0] - t * ell) ** 2 / (1 - ell**2) + sum(v**2 for v in xs[1:])
    W = (1 + q / a) ** (-m)
    lap = sum(sp.diff(W, v, 2) for v in xs)
    fun = sp.lambdify((t, ell, *xs), [W, sp.diff(W, t), sp.diff(W, t, 2), lap, sp.diff(W, xs[0])], "numpy")
    return fun


@pytest.mark.parametrize("dim", [3, 5])
def test_jet_matches_symbolic_differentiation(dim):
    fun = _symbolic_soliton(dim)
    rng = np.random.default_rng(11)
    for ell in (0.0, 0.3, 0.7):
        t = rng.uniform(-1, 1, 50)
        x = rng.uniform(-3, 3, (50, dim))
        jet = soliton_jet(t, x, ell, dim)
        ref = fun(t, ell, *x.T)
        for got, want in zip((jet.value, jet.dt, jet.dtt, jet.lap, jet.dx1), ref):
            np.testing.assert_allclose(got, want, rtol=1e-11, atol=1e-13)
        res_sym = ref[2] - ref[3] - np.abs(ref[0]) ** (4 / (dim - 2)) * ref[0]
        assert np.max(np.abs(res_sym)) <= 1e-10


def test_residual_examples():
    x = np.random.default_rng(0).normal(size=(100, 3))
    assert np.max(np.abs(pde_residual(0.0, x, SolitonParams()))) <= 1e-12
    r = pde_residual(0.3, np.array([[1.0, 0.5, -0.2]]), SolitonParams(ell=0.7))
    assert abs(r[0]) <= 1e-10
    x5 = np.random.default_rng(1).uniform(-3, 3, (100, 5))
    assert np.max(np.abs(pde_residual(0.0, x5, SolitonParams(ell=0.3, dim=5)))) <= 1e-10


@settings(max_examples=60, deadline=None)
@given(
    ell=st.floats(-0.95, 0.95),
    lam=st.floats(0.2, 5.0),
    sign=st.sampled_from([1, -1]),
    dim=st.sampled_from([3, 4, 5]),
    t=st.floats(-2, 2),
)
def test_residual_vanishes_across_family(ell, lam, sign, dim, t):
    x = np.random.default_rng(5).uniform(-4, 4, (20, dim))
    p = SolitonParams(ell=ell, lam=lam, sign=sign, dim=dim)
    u, _ = eval_soliton(t, x, p)
    scale = lam ** (-(dim - 2) / 2 - 2)
    assert np.max(np.abs(pde_residual(t, x, p))) <= 1e-10 * max(1.0, scale)


def test_traveling_wave_shift():
    g = BoxGrid3D(6.0, 24)
    p = SolitonParams(ell=0.5)
    a = sample_soliton(1.0, p, g)
    pts = g.points() - np.array([0.5, 0.0, 0.0])
    u0, ut0 = eval_soliton(0.0, pts, p)
    np.testing.assert_allclose(a.u, u0, rtol=0, atol=1e-15)
    np.testing.assert_allclose(a.ut, ut0, rtol=0, atol=1e-15)


def test_static_member_on_radial_grid():
    g = RadialGrid(10.0, 101)
    s = sample_soliton(0.0, SolitonParams(), g)
    np.testing.assert_array_equal(s.ut, 0.0)
    assert s.u[0] == 1.0
    with pytest.raises(Unsupported):
        sample_soliton(0.0, SolitonParams(ell=0.2), g)


def test_scaling_exponents():
    x = np.array([[0.3, -0.2, 0.1]])
    p1 = SolitonParams(ell=0.4)
    p2 = SolitonParams(ell=0.4, lam=2.0)
    u1, ut1 = eval_soliton(0.2, x, p1)
    u2, ut2 = eval_soliton(0.4, 2 * x, p2)
    assert u2[0] == pytest.approx(2**-0.5 * u1[0], rel=1e-14)
    assert ut2[0] == pytest.approx(2**-1.5 * ut1[0], rel=1e-14)


def test_exact_quantities_examples():
    q = exact_quantities(0.0, 3)
    assert (q.grad_norm_ratio, q.dt_norm_ratio, q.energy_ratio, q.momentum_over_energy) == (1.0, 0.0, 1.0, -0.0)
    q = exact_quantities(0.5, 3)
    assert q.grad_norm_ratio == pytest.approx(2.5 / (3 * math.sqrt(0.75)), rel=1e-15)
    assert q.grad_norm_ratio == pytest.approx(0.9622504, abs=1e-7)
    assert q.momentum_over_energy == -0.5


@pytest.mark.parametrize("dim", [3, 4, 5])
def test_boost_inequality(dim):
    for ell in np.linspace(-0.999, 0.999, 401):
        q = exact_quantities(ell, dim)
        assert q.grad_norm_ratio + (dim - 2) / 2 * q.dt_norm_ratio - 1 >= ell**4 / 8 - 1e-15


@pytest.mark.parametrize("dim", [3, 4, 5])
def test_ground_state_norms_against_oracle(dim):
    g = ground_state_norms(dim)
    assert g.K == pytest.approx(K_ORACLE[dim], rel=1e-13)
    assert g.energy_W / g.K == pytest.approx(1 / dim, rel=1e-15)
    assert g.sobolev_C == pytest.approx(g.K ** (-1 / dim), rel=1e-15)
    assert g.quadrature_agreement <= 1e-9


def test_K3_closed_form():
    assert ground_state_norms(3).K == pytest.approx(3 * math.sqrt(3) * math.pi**2 / 4, rel=1e-14)


@pytest.mark.parametrize("dim", [3, 5])
@pytest.mark.parametrize("ell", [0.0, 0.2, 0.5, 0.9])
def test_reduced_integrals_match_exact(dim, ell):
    K = ground_state_norms(dim).K
    red = reduced_soliton_integrals(ell, dim)
    ex = exact_quantities(ell, dim).scaled(K)
    for k in ("grad_sq", "dt_sq", "energy", "momentum_x1"):
        assert red[k] == pytest.approx(ex[k], rel=1e-9, abs=1e-12 * K)
