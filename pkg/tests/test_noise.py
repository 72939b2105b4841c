import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qdmemory import dynamics as dyn
from qdmemory import noise
from qdmemory.grid import SimGrid, make_waveform
from qdmemory.medium import lookup_scheme
from qdmemory.optimizer import default_init_pulse


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 20.0))
def test_lorentzian_weights_and_tail_account_for_unit_mass(fwhm):
    x = noise.default_detunings(1.0, fwhm)
    w, tail = noise.lorentzian_weights(x, fwhm)
    assert w.sum() + tail == pytest.approx(1.0, abs=1e-12)
    assert np.all(w >= 0)


def test_lorentzian_weights_exact_for_linear_functions():
    x = np.linspace(-3.0, 5.0, 9)
    fwhm = 1.3
    w, _ = noise.lorentzian_weights(x, fwhm)
    half = fwhm / 2
    exact = half / (2 * math.pi) * math.log((25 + half ** 2) / (9 + half ** 2))
    assert w @ x == pytest.approx(exact, rel=1e-12)


def test_lorentzian_weights_need_increasing_nodes():
    with pytest.raises(ValueError):
        noise.lorentzian_weights(np.array([0.0, 0.0, 1.0]), 1.0)


def _scan(curve, x):
    return noise.DetuningScan(x, curve(x), 0.5 * curve(x), fixed_pulse=None)


def test_zero_linewidth_reads_the_resonant_value():
    x = np.linspace(-10, 10, 41)
    es, et = noise.wandering_average(_scan(lambda d: np.exp(-d ** 2), x), 0.0)
    assert (es, et) == (1.0, 0.5)


def test_wandering_monotone_for_peaked_scan():
    x = noise.default_detunings(1.0, 5.0)
    scan = _scan(lambda d: 1 / (1 + d ** 2), x)
    vals = [noise.wandering_average(scan, w)[0] for w in (0.0, 0.2, 0.5, 1.0, 2.0, 5.0)]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    # Lorentzian of half-width 1 convolved with one of half-width 0.5: peak 1 / 1.5
    assert vals[3] == pytest.approx(1 / 1.5, rel=1e-3)


def test_truncation_warning(caplog):
    x = np.linspace(-1, 1, 21)
    with caplog.at_level(logging.WARNING, logger="qdmemory.noise"):
        noise.wandering_average(_scan(lambda d: np.ones_like(d), x), 5.0)
    assert "truncates" in caplog.text


def test_default_detunings_shape():
    x = noise.default_detunings(1.0, 3.0)
    assert x[0] == pytest.approx(-60.0) and x[-1] == pytest.approx(60.0)
    assert np.all(np.diff(x) > 0)
    assert np.allclose(x, -x[::-1])


def test_phase_tracks_diffuse():
    g = SimGrid(2, 201, 10.0)
    D = 0.7
    phases = noise.phase_tracks(g, D, 4000, seed=3)
    assert np.all(phases[:, 0] == 0)
    msd = np.mean(phases ** 2, axis=0)
    # var of the sample mean of phi^2 is 2 (D tau)^2 / n
    sigma = np.sqrt(2 / 4000) * D * g.tau
    assert np.all(np.abs(msd - D * g.tau) <= 3 * sigma + 1e-15)


def test_phase_tracks_are_seeded():
    g = SimGrid(2, 50, 10.0)
    a = noise.phase_tracks(g, 1.0, 5, seed=11)
    assert np.array_equal(a, noise.phase_tracks(g, 1.0, 5, seed=11))
    assert not np.array_equal(a, noise.phase_tracks(g, 1.0, 5, seed=12))
    with pytest.raises(ValueError):
        noise.phase_tracks(g, -1.0, 5, 0)


def test_dephasing_without_noise_is_deterministic(small_grid, photon, trial_pulse):
    sc = lookup_scheme("ideal-3L", d=20)
    ens = noise.dephasing_monte_carlo(sc, trial_pulse, small_grid, 0.0, n_traj=3, seed=1)
    base = dyn.evaluate(sc, trial_pulse, photon, small_grid).report
    assert ens.eta_s_mean == pytest.approx(base.eta_s, rel=1e-12)
    assert ens.eta_s_std == pytest.approx(0.0, abs=1e-14)
    assert ens.to_dict()["rng"] == noise.RNG_ALGORITHM


def test_dephasing_reproducible(small_grid, trial_pulse):
    sc = lookup_scheme("ideal-3L", d=20)
    a = noise.dephasing_monte_carlo(sc, trial_pulse, small_grid, 0.5, n_traj=4, seed=9)
    b = noise.dephasing_monte_carlo(sc, trial_pulse, small_grid, 0.5, n_traj=4, seed=9, workers=2)
    assert a.to_dict() == b.to_dict()


def test_detuning_scan():
    # fine time step: the detuning is resolved, not just stably stepped
    grid = SimGrid(60, 8000, 10.0)
    photon = make_waveform("sharp-exponential", 1.0, grid)
    pulse = default_init_pulse(grid)
    sc = lookup_scheme("D2-clock-config4", d=30)
    scan = noise.scan_detuning(sc, pulse, photon, grid, [-1e4 * sc.gamma, 0.0])
    base = dyn.evaluate(sc, pulse, photon, grid).report
    assert scan.eta_s[1] == base.eta_s and scan.eta_tot[1] == base.eta_tot
    assert scan.eta_s[0] < 1e-3 * base.eta_s
    assert not scan.errors
