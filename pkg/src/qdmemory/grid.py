"""Computational domain, quadrature, photon waveforms and control pulses.

Fields live on a uniform ``(tau, z)`` grid with ``z`` in [0, 1] and ``tau`` in
[0, T] (ns).  Arrays are stored time-major, shape ``(n_t, n_z)``.  Every
integral uses the trapezoidal rule.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


def trapezoid_weights(n: int, h: float) -> np.ndarray:
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


@dataclass(frozen=True)
class SimGrid:
    n_z: int
    n_t: int
    T: float

    def __post_init__(self):
        if self.n_z < 2 or self.n_t < 2:
            raise ValueError("grid needs at least two points in each direction")
        if not self.T > 0:
            raise ValueError("window length T must be positive")

    @property
    def dz(self) -> float:
        return 1.0 / (self.n_z - 1)

    @property
    def dt(self) -> float:
        return self.T / (self.n_t - 1)

    @property
    def tau(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.n_t)

    @property
    def z(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n_z)

    @property
    def wt(self) -> np.ndarray:
        return trapezoid_weights(self.n_t, self.dt)

    @property
    def wz(self) -> np.ndarray:
        return trapezoid_weights(self.n_z, self.dz)

    def integrate_t(self, f) -> float:
        return float(np.dot(self.wt, np.asarray(f)))

    def integrate_z(self, f) -> float:
        return float(np.dot(self.wz, np.asarray(f)))

    def to_dict(self) -> dict:
        return {"n_z": self.n_z, "n_t": self.n_t, "T": self.T}


def grid_norm(f, grid: SimGrid, axis: str = "t") -> float:
    """Trapezoidal ``sum |f|^2 w_i`` along the time (default) or space axis."""
    a = np.abs(np.asarray(f)) ** 2
    return grid.integrate_t(a) if axis == "t" else grid.integrate_z(a)


WAVEFORM_KINDS = ("sharp-exponential", "loaded-exponential", "phase-noisy")


@dataclass(frozen=True)
class PhotonWaveform:
    kind: str
    T1: float
    grid: SimGrid
    samples: np.ndarray = field(repr=False)
    T_L: float | None = None
    phase_track: np.ndarray | None = field(default=None, repr=False)

    def scaled(self, c: complex) -> "PhotonWaveform":
        """Same waveform multiplied by ``c`` (not renormalized)."""
        return PhotonWaveform(self.kind, self.T1, self.grid, self.samples * c, self.T_L, self.phase_track)

    def with_phase(self, phase: np.ndarray) -> "PhotonWaveform":
        phase = np.asarray(phase, dtype=float)
        samples = normalize(self.samples * np.exp(-1j * phase), self.grid)
        return PhotonWaveform("phase-noisy", self.T1, self.grid, samples, self.T_L, phase)


def normalize(samples, grid: SimGrid) -> np.ndarray:
    samples = np.asarray(samples, dtype=complex)
    n = grid_norm(samples, grid)
    if n == 0:
        raise ValueError("cannot normalize a zero waveform")
    return samples / math.sqrt(n)


def make_waveform(kind: str, T1: float, grid: SimGrid, T_L: float | None = None,
                  phase_track=None) -> PhotonWaveform:
    """Input photon envelope on ``grid``, renormalized to unit grid norm.

    ``phase-noisy`` is the sharp exponential multiplied by ``exp(-i phi(tau))``.
    """
    if kind not in WAVEFORM_KINDS:
        raise ValueError(f"unknown waveform kind {kind!r}; expected one of {WAVEFORM_KINDS}")
    if not T1 > 0:
        raise ValueError("T1 must be positive")
    tau = grid.tau
    if kind == "loaded-exponential":
        if T_L is None or not 0 < T_L < T1:
            raise ValueError("loaded-exponential needs 0 < T_L < T1")
        arg = (np.exp(-tau / T1) - np.exp(-tau / T_L)) / (T1 - T_L)
        samples = np.sqrt(np.clip(arg, 0.0, None)).astype(complex)
    else:
        samples = (np.exp(-tau / (2 * T1)) / math.sqrt(T1)).astype(complex)
    phase = None
    if kind == "phase-noisy":
        if phase_track is None:
            raise ValueError("phase-noisy waveform needs a phase track")
        phase = np.asarray(phase_track, dtype=float)
        if phase.shape != tau.shape:
            raise ValueError("phase track must have one sample per time point")
        samples = samples * np.exp(-1j * phase)
    return PhotonWaveform(kind, T1, grid, normalize(samples, grid), T_L, phase)


@dataclass(frozen=True)
class ControlPulse:
    """Real Rabi envelope sampled on the time grid, in units of gamma."""
    grid: SimGrid
    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.shape != (self.grid.n_t,):
            raise ValueError(f"pulse needs {self.grid.n_t} samples, got {s.shape}")
        if not np.all(np.isfinite(s)):
            raise ValueError("pulse samples must be finite")
        object.__setattr__(self, "samples", s)

    @property
    def omega_m(self) -> float:
        return float(np.max(self.samples))

    @classmethod
    def zeros(cls, grid: SimGrid) -> "ControlPulse":
        return cls(grid, np.zeros(grid.n_t))

    @classmethod
    def gaussian(cls, grid: SimGrid, amplitude: float = 10.0, center: float | None = None,
                 width: float = 1.0) -> "ControlPulse":
        center = 0.5 * grid.T if center is None else center
        return cls(grid, amplitude * np.exp(-0.5 * ((grid.tau - center) / width) ** 2))

    def resample(self, grid: SimGrid) -> "ControlPulse":
        if grid == self.grid:
            return self
        return ControlPulse(grid, np.interp(grid.tau, self.grid.tau, self.samples, right=0.0))


@dataclass
class FieldState:
    """Discretized fields on the grid, shape ``(n_t, n_z)``.

    For ``direction == "adjoint"`` the arrays hold the Lagrange multipliers
    (equivalently the backward-retrieval fields); ``e_out`` is the retrieved
    photon and ``omega_grad`` the discrete gradient of the storage efficiency
    with respect to each pulse sample.
    """
    grid: SimGrid
    E: np.ndarray = field(repr=False)
    P1: np.ndarray = field(repr=False)
    P2: np.ndarray = field(repr=False)
    S: np.ndarray = field(repr=False)
    direction: str = "forward"
    e_out: np.ndarray | None = field(default=None, repr=False)
    omega_grad: np.ndarray | None = field(default=None, repr=False)

    @property
    def spin_wave(self) -> np.ndarray:
        return self.S[-1]


# ---------------------------------------------------------------- CSV I/O

def write_real_csv(path, grid: SimGrid, values, header=("tau_ns", "value")) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for t, v in zip(grid.tau, np.asarray(values, dtype=float)):
            w.writerow([repr(float(t)), repr(float(v))])


def write_complex_csv(path, grid: SimGrid, values) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["tau_ns", "re", "im"])
        for t, v in zip(grid.tau, np.asarray(values, dtype=complex)):
            w.writerow([repr(float(t)), repr(float(v.real)), repr(float(v.imag))])


def read_pulse_csv(path, grid: SimGrid) -> ControlPulse:
    """Load a two-column (tau_ns, value) pulse and interpolate onto ``grid``."""
    data = np.loadtxt(Path(path), delimiter=",", skiprows=1, ndmin=2)
    tau, values = data[:, 0], data[:, 1]
    if len(tau) == grid.n_t and np.allclose(tau, grid.tau):
        return ControlPulse(grid, values)
    return ControlPulse(grid, np.interp(grid.tau, tau, values, left=0.0, right=0.0))
