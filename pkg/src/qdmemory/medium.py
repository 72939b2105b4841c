"""87Rb level configurations, relative dipole moments and control-power units.

Internal units: time in ns, angular frequencies in rad/ns, Rabi amplitudes in
units of the excited-state coherence decay ``gamma``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace

import numpy as np

# W m^-2, D2 cycling transition; P = C * w0^2 * (Omega/gamma)^2
POWER_CONSTANT = 52.47

HF_SPLITTING_MHZ = 6835.0


def mhz(f: float) -> float:
    """Angular frequency in rad/ns for a frequency given in MHz."""
    return 2.0 * math.pi * f * 1e-3


GAMMA_D2 = mhz(3.035)
GAMMA_D1 = math.pi * 5.75e-3
DELTA_E_D2 = mhz(156.95)
DELTA_E_D1 = mhz(814.5)
DELTA_HF = mhz(HF_SPLITTING_MHZ)
# reduced-moment ratio between the D1 and D2 lines
R_D1 = 1.0 / math.sqrt(2.0)


class CatalogError(KeyError):
    pass


@dataclass(frozen=True)
class LevelScheme:
    label: str
    mu_1g: float
    mu_1s: float
    mu_2g: float
    mu_2s: float
    gamma: float
    delta_e: float
    delta_g: float = 0.0
    delta_s: float = 0.0
    d: float = 0.0
    delta_hf: float = DELTA_HF
    line: str = ""
    polarization: str = ""

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if not self.d >= 0:
            raise ValueError(f"optical depth must be non-negative, got {self.d}")
        for name in ("mu_1g", "mu_1s", "mu_2g", "mu_2s"):
            if abs(getattr(self, name)) > 1.0 + 1e-12:
                raise ValueError(f"|{name}| must not exceed 1")

    @property
    def is_three_level(self) -> bool:
        return self.mu_2g == 0.0 and self.mu_2s == 0.0

    @property
    def coupling(self) -> float:
        """sqrt(d * gamma), the field-polarization coupling in rad/ns."""
        return math.sqrt(self.d * self.gamma)

    def with_(self, **changes) -> "LevelScheme":
        return replace(self, **changes)

    def three_level(self) -> "LevelScheme":
        """The same scheme with the second excited state removed."""
        return replace(self, mu_2g=0.0, mu_2s=0.0, label=self.label + "-3L")


@dataclass(frozen=True)
class _Entry:
    label: str
    line: str
    g: str
    s: str
    e1: str
    e2: str
    mu: tuple[float, float, float, float]
    gamma: float
    delta_e: float
    polarization: str = ""


def _sq(x: float) -> float:
    return math.copysign(math.sqrt(abs(x)), x)


def _build_catalog() -> dict[str, _Entry]:
    entries: list[_Entry] = []

    def add(label, line, g, s, e1, e2, mu, gamma, delta_e, pol=""):
        entries.append(_Entry(label, line, g, s, e1, e2, tuple(float(m) for m in mu), gamma, delta_e, pol))

    # Ground/excited moment tables, keyed [excited][ground].
    d2_stretch = {"1',0": {"1,-1": _sq(5 / 12), "2,1": _sq(1 / 20)},
                  "2',0": {"1,-1": _sq(1 / 12), "2,1": -_sq(1 / 4)}}
    d2_clock = {"1',1": {"1,0": _sq(5 / 12), "2,0": _sq(1 / 60)},
                "2',1": {"1,0": _sq(1 / 4), "2,0": _sq(1 / 4)}}
    d1_stretch = {"1',0": {"1,-1": -_sq(1 / 12), "2,1": _sq(1 / 4)},
                  "2',0": {"1,-1": -_sq(1 / 12), "2,1": -_sq(1 / 4)}}
    d1_clock = {"1',1": {"1,0": -_sq(1 / 12), "2,0": _sq(1 / 12)},
                "2',1": {"1,0": -_sq(1 / 4), "2,0": _sq(1 / 4)}}

    def config(label, line, table, g, s, e1, e2, gamma, split, pol="", drop_second=False):
        mu1g, mu1s = table[e1][g], table[e1][s]
        if drop_second:
            mu2g = mu2s = 0.0
            e2_name = ""
        else:
            mu2g, mu2s = table[e2][g], table[e2][s]
            e2_name = e2
        # |2> above |1> when the resonant state is the lower F'
        sign = 1.0 if e1.startswith("1'") else -1.0
        add(label, line, g, s, e1, e2_name, (mu1g, mu1s, mu2g, mu2s), gamma, sign * split, pol)

    d2 = (GAMMA_D2, DELTA_E_D2)
    config("D2-stretch-config1", "D2", d2_stretch, "1,-1", "2,1", "1',0", "2',0", *d2, "sigma")
    config("D2-stretch-config2", "D2", d2_stretch, "1,-1", "2,1", "2',0", "1',0", *d2, "sigma")
    config("D2-stretch-config3", "D2", d2_stretch, "2,1", "1,-1", "1',0", "2',0", *d2, "sigma")
    config("D2-stretch-config4", "D2", d2_stretch, "2,1", "1,-1", "2',0", "1',0", *d2, "sigma")
    config("D2-clock-config1", "D2", d2_clock, "1,0", "2,0", "1',1", "2',1", *d2, "same")
    config("D2-clock-config2", "D2", d2_clock, "1,0", "2,0", "2',1", "1',1", *d2, "same")
    config("D2-clock-config3", "D2", d2_clock, "2,0", "1,0", "1',1", "2',1", *d2, "same")
    config("D2-clock-config4", "D2", d2_clock, "2,0", "1,0", "2',1", "1',1", *d2, "same")

    d1 = (GAMMA_D1, DELTA_E_D1)
    config("D1-stretch-config1", "D1", d1_stretch, "1,-1", "2,1", "1',0", "2',0", *d1, "sigma")
    config("D1-stretch-config2", "D1", d1_stretch, "2,1", "1,-1", "1',0", "2',0", *d1, "sigma")
    config("D1-clock-config1", "D1", d1_clock, "1,0", "2,0", "1',1", "2',1", *d1, "same")
    config("D1-clock-config2", "D1", d1_clock, "1,0", "2,0", "2',1", "1',1", *d1, "same")
    config("D1-clock-config3", "D1", d1_clock, "1,0", "2,0", "2',1", "1',1", *d1, "same",
           drop_second=True)

    split = mhz(100.0)
    add("ideal-3L", "ideal", "g", "s", "1", "", (1.0, 1.0, 0.0, 0.0), GAMMA_D2, split)
    add("4L+", "ideal", "g", "s", "1", "2", (1.0, 1.0, 1.0, 1.0), GAMMA_D2, split)
    add("4L-", "ideal", "g", "s", "1", "2", (1.0, 1.0, 1.0, -1.0), GAMMA_D2, split)
    return {e.label: e for e in entries}


CATALOG: dict[str, _Entry] = _build_catalog()
CATALOG_VERSION = "rb87-1"


def labels() -> list[str]:
    return list(CATALOG)


def lookup_scheme(label: str, d: float = 75.0, detunings: tuple[float, float] = (0.0, 0.0),
                  delta_hf: float = DELTA_HF, rescale_d1: bool = False) -> LevelScheme:
    """Build a :class:`LevelScheme` from a catalog entry.

    ``detunings`` are ``(delta_g, delta_s)`` in rad/ns.  The D1 tables are
    taken as already reduced; ``rescale_d1`` multiplies every D1 moment by
    ``R_D1`` once more (this lowers the effective optical depth by half).
    """
    try:
        e = CATALOG[label]
    except KeyError:
        raise CatalogError(f"unknown scheme {label!r}; valid labels: {', '.join(CATALOG)}") from None
    if d < 0:
        raise ValueError(f"optical depth must be non-negative, got {d}")
    mu = e.mu
    if rescale_d1 and e.line == "D1":
        mu = tuple(R_D1 * m for m in mu)
    mu_1g, mu_1s, mu_2g, mu_2s = mu
    return LevelScheme(label=label, mu_1g=mu_1g, mu_1s=mu_1s, mu_2g=mu_2g, mu_2s=mu_2s,
                       gamma=e.gamma, delta_e=e.delta_e, delta_g=float(detunings[0]),
                       delta_s=float(detunings[1]), d=float(d), delta_hf=delta_hf,
                       line=e.line, polarization=e.polarization)


def export_catalog_csv(stream=None) -> str:
    """Write the catalog as CSV; returns the text."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["label", "line", "g", "s", "e1", "e2", "mu_1g", "mu_1s", "mu_2g", "mu_2s",
                "delta_e_MHz", "gamma_MHz"])
    for e in CATALOG.values():
        w.writerow([e.label, e.line, e.g, e.s, e.e1, e.e2, *(f"{m:.10f}" for m in e.mu),
                    f"{e.delta_e / (2 * math.pi * 1e-3):.4f}", f"{e.gamma / (2 * math.pi * 1e-3):.4f}"])
    text = buf.getvalue()
    if stream is not None:
        stream.write(text)
    return text


def rabi_to_peak_power(omega_m: float, waist: float) -> float:
    """Peak control power in W for a peak Rabi amplitude ``omega_m`` (units of gamma)
    and a Gaussian 1/e^2 waist in metres."""
    if omega_m < 0 or waist <= 0:
        raise ValueError("omega_m must be >= 0 and waist > 0")
    return POWER_CONSTANT * waist ** 2 * omega_m ** 2


def pulse_energy(pulse, waist: float) -> float:
    """Control pulse energy in J. ``pulse`` is a :class:`ControlPulse`."""
    if waist <= 0:
        raise ValueError("waist must be positive")
    # pulse samples are in units of gamma, tau in ns
    integral_ns = pulse.grid.integrate_t(np.abs(pulse.samples) ** 2)
    return POWER_CONSTANT * waist ** 2 * integral_ns * 1e-9
