import math

import pytest
from hypothesis import given, strategies as st

from qdmemory import medium
from qdmemory.grid import ControlPulse, SimGrid
from qdmemory.medium import CatalogError, lookup_scheme


def test_d2_clock_moments():
    c1 = lookup_scheme("D2-clock-config1")
    assert c1.mu_1g == pytest.approx(math.sqrt(5 / 12), abs=1e-15)
    assert c1.mu_2g == pytest.approx(math.sqrt(1 / 4), abs=1e-15)
    c3 = lookup_scheme("D2-clock-config3")
    assert c3.mu_1g == pytest.approx(math.sqrt(1 / 60), abs=1e-15)
    assert c3.mu_2g == pytest.approx(math.sqrt(1 / 4), abs=1e-15)


def test_d2_stretch_config1():
    s = lookup_scheme("D2-stretch-config1", d=75, detunings=(0, 0))
    expected = (math.sqrt(5 / 12), math.sqrt(1 / 20), math.sqrt(1 / 12), -math.sqrt(1 / 4))
    assert (s.mu_1g, s.mu_1s, s.mu_2g, s.mu_2s) == pytest.approx(expected, abs=1e-15)
    assert s.delta_e == pytest.approx(2 * math.pi * 156.95e-3)
    assert s.d == 75


def test_ideal_and_scenarios():
    s = lookup_scheme("ideal-3L")
    assert (s.mu_1g, s.mu_1s, s.mu_2g, s.mu_2s) == (1.0, 1.0, 0.0, 0.0)
    assert s.is_three_level
    assert lookup_scheme("4L-").mu_2s == -1.0
    assert lookup_scheme("4L+").delta_e == pytest.approx(medium.mhz(100.0))


def test_d1_moments_and_optional_rescale():
    plain = lookup_scheme("D1-clock-config2")
    assert abs(plain.mu_1g) == pytest.approx(math.sqrt(1 / 4))
    reduced = lookup_scheme("D1-clock-config2", rescale_d1=True)
    assert abs(reduced.mu_1g) == pytest.approx(math.sqrt(1 / 4) / math.sqrt(2))
    # D2 entries are never touched by the option
    assert lookup_scheme("D2-clock-config4", rescale_d1=True) == lookup_scheme("D2-clock-config4")


def test_d1_clock_config3_is_three_level():
    c2, c3 = lookup_scheme("D1-clock-config2"), lookup_scheme("D1-clock-config3")
    assert c3.is_three_level
    assert (c3.mu_1g, c3.mu_1s) == (c2.mu_1g, c2.mu_1s)


def test_unknown_label_lists_valid_ones():
    with pytest.raises(CatalogError, match="ideal-3L"):
        lookup_scheme("D3-nothing")


def test_negative_depth_rejected():
    with pytest.raises(ValueError):
        lookup_scheme("ideal-3L", d=-1)


def test_peak_power_examples():
    assert medium.rabi_to_peak_power(43.12, 350e-6) == pytest.approx(12e-3, rel=0.01)
    assert medium.rabi_to_peak_power(0.0, 0.3) == 0.0
    assert medium.rabi_to_peak_power(1.0, 1.0) == pytest.approx(52.47)
    with pytest.raises(ValueError):
        medium.rabi_to_peak_power(-1.0, 1.0)
    with pytest.raises(ValueError):
        medium.rabi_to_peak_power(1.0, 0.0)


@given(st.floats(0.0, 1e3), st.floats(1e-6, 1.0))
def test_peak_power_scales_quadratically(omega, waist):
    p = medium.rabi_to_peak_power(omega, waist)
    assert medium.rabi_to_peak_power(2 * omega, waist) == pytest.approx(4 * p, rel=1e-12, abs=1e-300)


def test_pulse_energy():
    grid = SimGrid(2, 11, 1.0)
    assert medium.pulse_energy(ControlPulse.zeros(grid), 1.0) == 0.0
    square = ControlPulse(grid, [1.0] * 11)
    assert medium.pulse_energy(square, 1.0) == pytest.approx(52.47e-9)


def test_catalog_csv_contains_stretch_moment():
    text = medium.export_catalog_csv()
    row = next(r for r in text.splitlines() if r.startswith("D2-stretch-config1"))
    assert "0.6454972244" in row
    assert len(text.splitlines()) == len(medium.labels()) + 1
