import numpy as np
import pytest

from critwave import _backend
from critwave.closed_forms import ground_state
from critwave.errors import InvalidInput, InvalidParameter, TruncationError, Undetermined, Unsupported
from critwave.grids import BoxGrid3D, FieldState, RadialGrid
from critwave.nonlinear import (
    SolverOptions,
    cfl_dt,
    detect_blowup,
    evolve,
    fit_blowup_time,
    load_checkpoint,
    save_checkpoint,
    support_radius,
)


def bump(r, a, R):
    return a * np.clip(1.0 - (r / R) ** 2, 0.0, None) ** 4


def sub_threshold(n=1024, r_max=4.0, dim=3):
    g = RadialGrid(r_max, n)
    return FieldState(bump(g.r, 0.5, 2.0), bump(g.r, 0.3, 1.5), g, dim)


@pytest.mark.parametrize("bad", [dict(cfl_safety=0.0), dict(cfl_safety=1.0), dict(u_cap=-1.0),
                                 dict(drift_tol=0.0), dict(snapshot_stride=0), dict(backend="fortran")])
def test_options_validation(bad):
    with pytest.raises(InvalidParameter):
        SolverOptions(**bad)


def test_step_divides_horizon_in_whole_strides():
    s = sub_threshold()
    opts = SolverOptions(snapshot_stride=8)
    tr = evolve(s, 0.7, opts)
    assert tr.dt <= cfl_dt(s.grid, opts) * (1 + 1e-12)
    assert tr.times[-1] == pytest.approx(0.7, abs=1e-14)
    np.testing.assert_allclose(np.diff(tr.times), 8 * tr.dt, rtol=1e-12)


def test_energy_drift_is_second_order():
    s = sub_threshold()
    d1 = evolve(s, 1.0, SolverOptions(cfl_safety=0.5)).max_drift
    d2 = evolve(s, 1.0, SolverOptions(cfl_safety=0.25)).max_drift
    assert 3.0 < d1 / d2 < 5.0


def test_time_reversal():
    s = sub_threshold()
    fwd = evolve(s, 1.0).final_state
    back = evolve(fwd.replace(ut=-fwd.ut), 1.0).final_state
    assert np.max(np.abs(back.u - s.u)) < 1e-10
    assert np.max(np.abs(back.ut + s.ut)) < 1e-10


def test_negative_horizon():
    s = sub_threshold()
    tr = evolve(s, -0.5)
    assert tr.times[-1] == pytest.approx(-0.5)
    assert np.all(np.diff(tr.times) < 0)


def test_zero_data_stay_zero():
    g = RadialGrid(4.0, 100)
    tr = evolve(FieldState(np.zeros(100), np.zeros(100), g), 1.0)
    assert np.all(tr.final_state.u == 0.0) and tr.max_drift == 0.0


def test_static_ground_state_stays_put():
    g = RadialGrid(20.0, 2001)
    s = FieldState(ground_state(g.r, 3), np.zeros(g.n), g, 3)
    tr = evolve(s, 1.0)
    inner = g.r < tr.valid_radius - 1.0
    assert tr.valid_radius == pytest.approx(19.0)
    assert np.max(np.abs(tr.final_state.u - s.u)[inner]) < 1e-4
    assert tr.events[0]["type"] == "boundary-data"


@pytest.mark.skipif("cython" not in _backend.available_backends(), reason="compiled kernel not built")
@pytest.mark.parametrize("dim", [3, 4, 5])
def test_backends_agree(dim):
    s = sub_threshold(n=512, dim=dim)
    a = evolve(s, 1.0, SolverOptions(backend="python"))
    b = evolve(s, 1.0, SolverOptions(backend="cython"))
    assert a.backend == "python" and b.backend == "cython"
    if dim in (3, 4):
        # integer powers: both kernels perform the same floating point operations
        np.testing.assert_array_equal(b.final_state.u, a.final_state.u)
        np.testing.assert_array_equal(b.final_state.ut, a.final_state.ut)
    else:
        # libm pow and numpy power differ in the last ulp; the origin cell amplifies it
        np.testing.assert_allclose(b.final_state.u, a.final_state.u, rtol=0, atol=1e-12)
        np.testing.assert_allclose(b.final_state.ut, a.final_state.ut, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(b.energy, a.energy, rtol=1e-12)


def test_truncation_and_unsupported():
    s = sub_threshold()
    with pytest.raises(TruncationError):
        evolve(s, 1.99)
    with pytest.raises(InvalidParameter):
        evolve(s, float("inf"))
    b = BoxGrid3D(2.0, 8)
    with pytest.raises(Unsupported):
        evolve(FieldState(np.zeros(b.shape), np.zeros(b.shape), b), 0.1)


def test_support_radius():
    s = sub_threshold()
    assert support_radius(s) == pytest.approx(2.0, abs=s.grid.h)


def test_synthetic_blowup_fit():
    t = np.linspace(0.0, 1.999, 4000)
    m = (0.7 * (2.0 - t)) ** -0.5  # max|u| for lambda ~ (T - t), N = 3
    T, conf, slope, tc, lev = fit_blowup_time(t, m, 3)
    assert T == pytest.approx(2.0, abs=1e-3)
    assert slope == pytest.approx(0.7, rel=1e-3)
    assert conf < 1e-4 and len(tc) == len(lev) >= 4


def test_blowup_fit_needs_growth():
    t = np.linspace(0, 1, 50)
    with pytest.raises(Undetermined):
        fit_blowup_time(t, np.ones(50), 3)
    with pytest.raises(Undetermined):
        fit_blowup_time(t[:1], np.ones(1), 3)


def test_ground_state_above_threshold_blows_up():
    g = RadialGrid(20.0, 2001)
    s = FieldState(1.2 * ground_state(g.r, 3), np.zeros(g.n), g, 3)
    tr = evolve(s, 2.0, SolverOptions(drift_tol=1e-2))
    assert tr.blowup and tr.times[-1] < 1.2
    est = detect_blowup(tr)
    assert est.T_estimate == pytest.approx(1.08, abs=0.02)
    assert est.drift_ok


def test_bounded_run_has_no_estimate():
    assert detect_blowup(evolve(sub_threshold(), 0.5)) is None


@pytest.mark.parametrize("grid", [RadialGrid(4.0, 64), BoxGrid3D(2.0, 9)])
def test_checkpoint_roundtrip(tmp_path, grid):
    rng = np.random.default_rng(3)
    s = FieldState(rng.normal(size=grid.shape), rng.normal(size=grid.shape), grid, 3, t=0.375)
    p = tmp_path / "state.cwv"
    save_checkpoint(s, p)
    assert p.read_bytes()[:4] == b"CWV1"
    back = load_checkpoint(p)
    assert back.grid == grid and back.t == 0.375 and back.dim == 3
    np.testing.assert_array_equal(back.u, s.u)
    np.testing.assert_array_equal(back.ut, s.ut)


def test_checkpoint_corruption(tmp_path):
    g = RadialGrid(4.0, 64)
    p = tmp_path / "x.cwv"
    save_checkpoint(FieldState(np.zeros(64), np.zeros(64), g), p)
    data = p.read_bytes()
    (tmp_path / "short").write_bytes(data[:10])
    (tmp_path / "magic").write_bytes(b"XXXX" + data[4:])
    (tmp_path / "trunc").write_bytes(data[:-8])
    for name in ("short", "magic", "trunc"):
        with pytest.raises(InvalidInput):
            load_checkpoint(tmp_path / name)
