import csv

import numpy as np
import pytest

from critwave.closed_forms import SolitonParams, ground_state, sample_soliton
from critwave.errors import InvalidInput, InvalidParameter, Unsupported
from critwave.grids import BoxGrid3D, FieldState, RadialGrid
from critwave.identities import (
    IDENTITY_IDS,
    Cutoff,
    _first_derivative,
    _second_derivative,
    canonical_identity,
    identity_trace,
    phi_functional,
    pohozaev_check,
    zs_functionals,
)
from critwave.nonlinear import SolverOptions, evolve


def bump(r, a, R):
    return a * np.clip(1.0 - (r / R) ** 2, 0.0, None) ** 4


@pytest.fixture(scope="module")
def runs():
    out = []
    for n in (513, 1025):
        g = RadialGrid(4.0, n)
        s = FieldState(bump(g.r, 0.5, 2.0), bump(g.r, 0.3, 1.5), g, 3)
        out.append(evolve(s, 1.0, SolverOptions(snapshot_stride=8)))
    return out


def test_canonical_ids():
    assert canonical_identity("4p") == "4'"
    assert canonical_identity("identity5") == "5"
    assert canonical_identity(3) == "3"
    with pytest.raises(InvalidInput):
        canonical_identity("6")


def test_cutoff_shape():
    c = Cutoff(1.0, 2.0)
    r = np.linspace(0, 3, 301)
    v = c.value(r)
    assert np.all(v[r <= 1] == 1.0) and np.all(v[r >= 2] == 0.0)
    assert np.all(np.diff(v) <= 0)
    # derivative matches a centered difference of the value
    rr = np.linspace(1.05, 1.95, 19)
    fd = (c.value(rr + 1e-6) - c.value(rr - 1e-6)) / 2e-6
    np.testing.assert_allclose(c.derivative(rr), fd, atol=1e-7)
    with pytest.raises(InvalidParameter):
        Cutoff(2.0, 1.0)


def test_time_differences_are_exact_on_quadratics():
    t = np.array([0.0, 0.1, 0.25, 0.3, 0.6])
    f = 3 * t**2 - t + 2
    np.testing.assert_allclose(_first_derivative(t, f), 6 * t[1:-1] - 1, rtol=1e-12)
    np.testing.assert_allclose(_second_derivative(t, f), 6.0, rtol=1e-12)


@pytest.mark.parametrize("ident", ["1'", "2'", "3'", "5", "1", "3", "4"])
def test_identity_gap_converges_second_order(runs, ident):
    cut = None if (ident.endswith("'") or ident == "5") else Cutoff(1.0, 2.5)
    g1, g2 = (identity_trace(tr, ident, cut).max_abs_gap for tr in runs)
    assert g2 < 2e-3
    assert 3.2 <= g1 / g2 <= 4.8


def test_radially_degenerate_identities_vanish(runs):
    for ident in ("2", "4'"):
        cut = Cutoff(1.0, 2.5) if ident == "2" else None
        assert identity_trace(runs[0], ident, cut).max_abs_gap == 0.0


def test_identity_csv(runs, tmp_path):
    tr = identity_trace(runs[0], "1'")
    p = tmp_path / "id.csv"
    tr.to_csv(p)
    rows = list(csv.reader(p.open()))
    assert rows[0] == ["t", "lhs_dt", "rhs", "gap"]
    assert len(rows) == len(tr.t) + 1
    assert float(rows[1][3]) == tr.gap[0]


def test_phi_derivative_matches_dl_plus_offset(runs):
    c1, c2 = (np.max(np.abs(phi_functional(tr).corrected_gap)) for tr in runs)
    assert c2 < 1e-3 and 3.2 <= c1 / c2 <= 4.8
    with pytest.raises(InvalidParameter):
        phi_functional(runs[0], ell=0.3)


def test_phi_offset_vanishes_on_energy_level():
    # K - N E is the normalization offset; for W itself it is zero up to quadrature.
    g = RadialGrid(20.0, 2001)
    s = FieldState(ground_state(g.r, 3), np.zeros(g.n), g, 3)
    tr = evolve(s, 0.5)
    ph = phi_functional(tr, far_field=True)
    assert abs(ph.energy_offset) < 0.05


@pytest.mark.parametrize("dim", [3, 4, 5])
def test_pohozaev(dim):
    assert abs(pohozaev_check(dim)) <= 1e-8


def test_zs_on_boosted_soliton():
    ell = 0.4
    g = BoxGrid3D(16.0, 96)
    s = sample_soliton(0.0, SolitonParams(ell=ell), g)
    z = zs_functionals(s, ell, 0.0, far_field=True)
    # u_t = -ell d_1 u for a traveling wave, so the annihilated quantity vanishes
    assert z.annihilation < 1e-6
    assert abs(z.S[1]) < 1e-8 and abs(z.S[2]) < 1e-8
    with pytest.raises(Unsupported):
        zs_functionals(FieldState(np.zeros(32), np.zeros(32), RadialGrid(1.0, 32)), ell, 0.0)


def test_all_ids_listed():
    assert set(IDENTITY_IDS) == {"1", "2", "3", "4", "1'", "2'", "3'", "4'", "5"}
