import math

import numpy as np
import pytest

from qdmemory.grid import (ControlPulse, SimGrid, grid_norm, make_waveform, read_pulse_csv,
                           write_real_csv)


@pytest.mark.parametrize("n", [2, 7, 100])
def test_norm_of_constant(n):
    g = SimGrid(2, n, 1.0)
    assert grid_norm(np.ones(n), g) == pytest.approx(1.0, abs=1e-14)


def test_norm_of_decaying_exponential():
    g = SimGrid(2, 40001, 40.0)
    assert grid_norm(np.exp(-g.tau / 2), g) == pytest.approx(1 - math.exp(-40), rel=1e-6)
    assert grid_norm(np.zeros(g.n_t), g) == 0.0


def test_sharp_exponential_ratio():
    g = SimGrid(2, 1001, 10.0)
    w = make_waveform("sharp-exponential", 1.0, g)
    i1 = int(round(1.0 / g.dt))
    assert abs(w.samples[0]) ** 2 / abs(w.samples[i1]) ** 2 == pytest.approx(math.e, rel=1e-12)


def test_loaded_exponential_peak():
    g = SimGrid(2, 100001, 10.0)
    T1, TL = 1.0, 0.01
    w = make_waveform("loaded-exponential", T1, g, T_L=TL)
    assert w.samples[0] == 0
    expected = math.log(T1 / TL) * T1 * TL / (T1 - TL)
    assert g.tau[np.argmax(np.abs(w.samples))] == pytest.approx(expected, abs=2 * g.dt)


@pytest.mark.parametrize("kind,kw", [("sharp-exponential", {}), ("loaded-exponential", {"T_L": 0.1}),
                                     ("phase-noisy", {"phase_track": np.linspace(0, 3, 301)})])
def test_waveforms_have_unit_norm(kind, kw):
    g = SimGrid(2, 301, 10.0)
    assert grid_norm(make_waveform(kind, 1.0, g, **kw).samples, g) == pytest.approx(1.0, abs=1e-12)


def test_waveform_validation():
    g = SimGrid(2, 11, 1.0)
    with pytest.raises(ValueError):
        make_waveform("loaded-exponential", 1.0, g, T_L=1.0)
    with pytest.raises(ValueError):
        make_waveform("phase-noisy", 1.0, g)
    with pytest.raises(ValueError):
        make_waveform("square", 1.0, g)


def test_grid_validation():
    with pytest.raises(ValueError):
        SimGrid(1, 10, 1.0)
    with pytest.raises(ValueError):
        SimGrid(10, 10, 0.0)


def test_pulse_validation(small_grid):
    with pytest.raises(ValueError):
        ControlPulse(small_grid, np.zeros(3))
    with pytest.raises(ValueError):
        ControlPulse(small_grid, np.full(small_grid.n_t, np.nan))


def test_pulse_csv_round_trip(tmp_path, small_grid):
    p = ControlPulse.gaussian(small_grid, 7.3, 2.1, 0.9)
    write_real_csv(tmp_path / "p.csv", small_grid, p.samples)
    back = read_pulse_csv(tmp_path / "p.csv", small_grid)
    assert np.array_equal(back.samples, p.samples)


def test_pulse_resample_is_interpolation():
    a, b = SimGrid(2, 11, 10.0), SimGrid(2, 21, 10.0)
    p = ControlPulse(a, np.linspace(0, 10, 11))
    assert np.allclose(p.resample(b).samples, np.linspace(0, 10, 21))
