import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qdmemory import dynamics as dyn
from qdmemory.grid import ControlPulse, SimGrid, make_waveform
from qdmemory.medium import lookup_scheme
from qdmemory.optimizer import default_init_pulse


def test_zero_control_stores_nothing(small_grid, photon):
    ev = dyn.evaluate(lookup_scheme("ideal-3L"), ControlPulse.zeros(small_grid), photon, small_grid)
    assert not np.any(ev.forward.S)
    assert ev.report.eta_s == 0.0 and ev.report.eta_tot == 0.0
    assert ev.report.eta_r is None


def test_zero_control_energy_goes_to_leak_and_decay(small_grid, photon):
    r = dyn.evaluate(lookup_scheme("ideal-3L", d=75), ControlPulse.zeros(small_grid), photon,
                     small_grid).report
    assert r.leak + r.decay_loss + r.residual_pol == pytest.approx(1.0, abs=5e-3)


def test_transparent_medium(small_grid, photon, trial_pulse):
    sc = lookup_scheme("ideal-3L", d=0.0)
    fwd = dyn.solve_storage(sc, trial_pulse, photon, small_grid)
    assert np.array_equal(fwd.E[:, -1], photon.samples)
    r = dyn.evaluate(sc, trial_pulse, photon, small_grid).report
    assert r.eta_s == 0.0
    assert r.balance_defect < 1e-10


def test_empty_spin_wave_has_no_retrieval(small_grid, trial_pulse):
    with pytest.raises(dyn.UndefinedRetrievalError):
        dyn.solve_adjoint(lookup_scheme("ideal-3L"), trial_pulse, np.zeros(small_grid.n_z),
                          small_grid)


def test_zero_control_retrieves_nothing(small_grid):
    adj = dyn.solve_adjoint(lookup_scheme("ideal-3L"), ControlPulse.zeros(small_grid),
                            np.ones(small_grid.n_z), small_grid)
    assert not np.any(adj.e_out)


def test_total_is_product(small_grid, photon, trial_pulse, ideal):
    r = dyn.evaluate(ideal, trial_pulse, photon, small_grid).report
    assert 0 < r.eta_tot <= r.eta_s <= 1
    assert r.eta_tot == pytest.approx(r.eta_s * r.eta_r, rel=1e-10)


def test_three_level_paths_agree_bitwise(small_grid, photon, trial_pulse):
    sc = lookup_scheme("D1-clock-config3", d=40)
    a = dyn.solve_storage(sc, trial_pulse, photon, small_grid, three_level_path=True)
    b = dyn.solve_storage(sc, trial_pulse, photon, small_grid, three_level_path=False)
    for x, y in ((a.E, b.E), (a.P1, b.P1), (a.S, b.S)):
        assert np.array_equal(x, y)
    with pytest.raises(ValueError):
        dyn.solve_storage(lookup_scheme("4L+"), trial_pulse, photon, small_grid, True)


@settings(max_examples=10, deadline=None)
@given(st.complex_numbers(min_magnitude=0.1, max_magnitude=10, allow_nan=False,
                          allow_infinity=False))
def test_linear_in_the_signal(c):
    grid = SimGrid(40, 60, 10.0)
    ph = make_waveform("sharp-exponential", 1.0, grid)
    sc = lookup_scheme("4L-", d=30)
    pulse = default_init_pulse(grid)
    a = dyn.solve_storage(sc, pulse, ph, grid)
    b = dyn.solve_storage(sc, pulse, ph.scaled(c), grid)
    np.testing.assert_allclose(b.S, c * a.S, rtol=1e-12, atol=1e-14)
    ra = dyn.evaluate(sc, pulse, ph, grid).report
    rb = dyn.evaluate(sc, pulse, ph.scaled(c), grid).report
    assert rb.eta_s == pytest.approx(ra.eta_s, rel=1e-10)
    assert rb.eta_tot == pytest.approx(ra.eta_tot, rel=1e-10)


def test_energy_balance_converges_second_order():
    sc = lookup_scheme("4L+", d=75)
    defects = []
    for n in (100, 200, 400):
        g = SimGrid(n, n, 10.0)
        r = dyn.evaluate(sc, default_init_pulse(g), make_waveform("sharp-exponential", 1, g), g)
        defects.append(r.report.balance_defect)
    assert defects[0] / defects[1] == pytest.approx(4.0, rel=0.1)
    assert defects[1] / defects[2] == pytest.approx(4.0, rel=0.1)


def test_large_excited_splitting_recovers_three_level():
    g = SimGrid(300, 400, 10.0)
    ph = make_waveform("sharp-exponential", 1.0, g)
    pulse = default_init_pulse(g)
    sc = lookup_scheme("D1-clock-config2", d=75)
    far = dyn.evaluate(sc.with_(delta_e=100 * sc.delta_e), pulse, ph, g).report.eta_s
    three = dyn.evaluate(sc.three_level(), pulse, ph, g).report.eta_s
    assert abs(far - three) < 0.01


def test_stable_far_off_resonance():
    g = SimGrid(200, 400, 10.0)
    ph = make_waveform("sharp-exponential", 1.0, g)
    sc = lookup_scheme("D2-clock-config4", d=75, detunings=(50.0, 0.0))
    r = dyn.evaluate(sc, default_init_pulse(g), ph, g).report
    assert 0 <= r.eta_s < 1e-4
    assert r.balance_defect < 1e-3


def test_backward_simulation_matches_adjoint_retrieval():
    g = SimGrid(300, 300, 10.0)
    ph = make_waveform("sharp-exponential", 1.0, g)
    sc = lookup_scheme("ideal-3L", d=75)
    pulse = default_init_pulse(g)
    ev = dyn.evaluate(sc, pulse, ph, g)
    out = dyn.retrieve_backward(sc, pulse, ev.forward.S[-1], g)
    assert g.integrate_t(np.abs(out) ** 2) == pytest.approx(
        g.integrate_t(np.abs(ev.adjoint.e_out) ** 2), rel=1e-3)


def test_instability_is_reported(small_grid, photon):
    huge = ControlPulse(small_grid, np.full(small_grid.n_t, 1e5))
    with pytest.raises(dyn.SolverInstabilityError) as info:
        dyn.solve_storage(lookup_scheme("ideal-3L", d=75), huge, photon, small_grid)
    assert info.value.index > 0


def test_grid_mismatch(small_grid, photon):
    other = SimGrid(10, 10, 10.0)
    with pytest.raises(ValueError):
        dyn.solve_storage(lookup_scheme("ideal-3L"), ControlPulse.zeros(other), photon, small_grid)


# ------------------------------------------------------------ four-wave mixing

def test_fwm_vanishes_for_huge_hyperfine_splitting(small_grid, photon, trial_pulse):
    sc = lookup_scheme("D1-clock-config3", d=75)
    far = sc.with_(delta_hf=sc.delta_hf * 1e6)
    fwd, stokes = dyn.solve_storage_fwm(far, trial_pulse, photon, small_grid)
    plain = dyn.solve_storage(far, trial_pulse, photon, small_grid)
    eta = lambda f: small_grid.integrate_z(np.abs(f.S[-1]) ** 2)
    assert abs(eta(fwd) - eta(plain)) < 1e-6
    assert np.max(np.abs(stokes)) < 1e-6


def test_fwm_rejects_bad_inputs(small_grid, photon, trial_pulse):
    with pytest.raises(ValueError):
        dyn.solve_storage_fwm(lookup_scheme("D1-clock-config2"), trial_pulse, photon, small_grid)
    sc = lookup_scheme("D1-clock-config3").with_(delta_hf=0.0)
    with pytest.raises(ValueError):
        dyn.solve_storage_fwm(sc, trial_pulse, photon, small_grid)


def test_fwm_ratio_estimate():
    sc = lookup_scheme("D1-clock-config3", d=75)
    est = dyn.fwm_drive_ratio_estimate(sc)
    assert est == pytest.approx(sc.d * sc.gamma ** 2 / sc.delta_hf ** 2)
    assert 5e-6 < est < 5e-5
