import math

import numpy as np
import pytest

from critwave.closed_forms import SolitonParams, ground_state, ground_state_norms, sample_soliton
from critwave.diagnostics import (
    _trend,
    blowup_profile_report,
    ell_from_conserved,
    energy_manifold_perturbation,
    energy_matched_ground_state,
    perturbation_family,
    track_modulation,
    trajectory_from_states,
    trapping_monitor,
)
from critwave.errors import InvalidInput, InvalidParameter, UndefinedVelocity
from critwave.fields import conserved_quantities, dl_functional
from critwave.grids import BoxGrid3D, FieldState, RadialGrid
from critwave.nonlinear import SolverOptions, evolve

K = ground_state_norms(3).K


def test_trend_labels():
    assert _trend(np.array([1.0, 1.0])) == "flat"
    assert _trend(np.array([3.0, 2.0, 1.0])) == "decreasing"
    assert _trend(np.array([1.0, 2.0])) == "increasing"
    assert _trend(np.array([1.0, 2.0, 1.5])) == "mixed"
    assert _trend(np.array([1.0])) == "undetermined"


@pytest.mark.parametrize("ell", [0.2, 0.5])
def test_ell_from_conserved_box(ell):
    st = sample_soliton(0.0, SolitonParams(ell=ell), BoxGrid3D(16.0, 96))
    est = ell_from_conserved(st)
    assert est[0] == pytest.approx(ell, abs=1e-3)
    assert np.all(np.abs(est[1:]) < 1e-10)


def test_ell_from_conserved_rejects_nonpositive_energy():
    g = RadialGrid(40.0, 4001)
    st = FieldState(1.6 * ground_state(g.r, 3), np.zeros(g.n), g, 3)
    assert conserved_quantities(st).E < 0
    with pytest.raises(UndefinedVelocity):
        ell_from_conserved(st)


def test_trajectory_from_closed_form_family():
    g = RadialGrid(40.0, 4001)
    T = 1.0
    times = np.linspace(0.0, 0.9, 10)
    states = []
    for t in times:
        lam = (T - t) ** 2
        states.append(FieldState(lam**-0.5 * ground_state(g.r / lam, 3), np.zeros(g.n), g, 3, t=t))
    tr = trajectory_from_states(times, states, blowup=True)
    rep = blowup_profile_report(tr, T_plus=T)
    assert not rep.empty and rep.T_source == "given"
    # lam/(T - t) = T - t decreases towards the blow-up time
    assert rep.lambda_over_remaining_decreasing
    np.testing.assert_allclose(rep.lam, (T - np.array(rep.t)) ** 2, rtol=1e-12)
    with pytest.raises(InvalidInput):
        trajectory_from_states(times[:3], states)


def test_profile_report_empty_for_bounded_run():
    g = RadialGrid(4.0, 401)
    r = g.r
    st = FieldState(0.3 * np.clip(1 - (r / 2) ** 2, 0, None) ** 4, np.zeros(g.n), g, 3)
    assert blowup_profile_report(evolve(st, 0.5)).empty


def test_profile_report_on_blowup():
    g = RadialGrid(20.0, 2001)
    st = FieldState(1.2 * ground_state(g.r, 3), np.zeros(g.n), g, 3)
    tr = evolve(st, 2.0, SolverOptions(drift_tol=1e-2))
    rep = blowup_profile_report(tr)
    assert rep.T_source == "detect_blowup" and rep.max_grad_sq_over_K > 2
    assert rep.ell_estimate == [0.0, 0.0, 0.0]
    assert rep.h1_distance_trend in ("increasing", "decreasing", "flat", "mixed")


def test_energy_matched_ground_state():
    g = RadialGrid(40.0, 4097)
    prof = np.exp(-g.r**2)
    st = energy_matched_ground_state(g, 1.001, prof)
    W = FieldState(ground_state(g.r, 3), np.zeros(g.n), g, 3)
    e_ref = conserved_quantities(W, far_field=True).E
    assert conserved_quantities(st, far_field=True).E == pytest.approx(e_ref, rel=1e-13)
    with pytest.raises(InvalidParameter):
        energy_matched_ground_state(g, -1.0, prof)


def test_perturbations_on_level_set_and_both_signs():
    g = RadialGrid(60.0, 8192)
    W = FieldState(ground_state(g.r, 3), np.zeros(g.n), g, 3)
    e_ref = conserved_quantities(W, far_field=True).E
    fam = perturbation_family(g, [1e-3], seed=7)
    assert [b for _, b, _ in fam] == [1, -1]
    for _, branch, st in fam:
        assert conserved_quantities(st, far_field=True).E == pytest.approx(e_ref, rel=1e-12)
        assert np.sign(dl_functional(st, 0.0, far_field=True)) == branch
    with pytest.raises(InvalidParameter):
        energy_manifold_perturbation(g, 1e-3, np.random.default_rng(0), branch=0)


def test_perturbation_family_is_reproducible():
    g = RadialGrid(30.0, 2048)
    a = perturbation_family(g, [1e-3, 1e-2], seed=11)
    b = perturbation_family(g, [1e-3, 1e-2], seed=11)
    c = perturbation_family(g, [1e-3, 1e-2], seed=12)
    for (_, _, x), (_, _, y) in zip(a, b):
        np.testing.assert_array_equal(x.u, y.u)
        np.testing.assert_array_equal(x.ut, y.ut)
    assert not np.array_equal(a[0][2].ut, c[0][2].ut)


@pytest.fixture(scope="module")
def near_ground_state_run():
    g = RadialGrid(40.0, 4097)
    st = energy_matched_ground_state(g, 1.001, np.exp(-g.r**2))
    return evolve(st, 1.0, SolverOptions(snapshot_stride=40))


def test_trapping_sign_persistence(near_ground_state_run):
    rep = trapping_monitor(near_ground_state_run, 0.0, far_field=True)
    assert rep.applicable and rep.sign_changes == 0
    assert rep.energy_mismatch < 1e-4


def test_trapping_not_applicable_off_normalization():
    g = RadialGrid(4.0, 401)
    st = FieldState(0.3 * np.clip(1 - (g.r / 2) ** 2, 0, None) ** 4, np.zeros(g.n), g, 3)
    rep = trapping_monitor(evolve(st, 0.5), 0.0)
    assert not rep.applicable and "normalization" in rep.reason


def test_track_modulation(near_ground_state_run):
    tr = track_modulation(near_ground_state_run)
    assert not tr.truncated and tr.t.size == near_ground_state_run.times.size
    assert np.all(np.abs(tr.lam - 1.0) < 0.05)
    assert math.isfinite(tr.modulation_rate_constant)
    d = tr.to_dict()
    assert len(d["dlambda_dt"]) == tr.t.size - 1


def test_track_truncates_outside_basin():
    g = RadialGrid(20.0, 2001)
    st = FieldState(1.2 * ground_state(g.r, 3), np.zeros(g.n), g, 3)
    tr = track_modulation(evolve(st, 0.2, SolverOptions(drift_tol=1e-2)))
    assert tr.truncated and "basin" in tr.reason and tr.t.size == 0
