"""Imperfect single photons: shot-to-shot carrier wandering and intra-shot dephasing.

Both models are evaluated against a fixed control pulse; nothing is
re-optimized.  Wandering averages a detuning scan over a Lorentzian of the
added linewidth; dephasing runs phase-diffusion Monte Carlo trajectories.
"""
from __future__ import annotations

import logging
import math
import statistics
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from . import dynamics as dyn
from ._parallel import ordered_map
from .grid import ControlPulse, PhotonWaveform, SimGrid, make_waveform
from .medium import LevelScheme

log = logging.getLogger(__name__)

RNG_ALGORITHM = "numpy.random.PCG64"
TRUNCATION_TOL = 1e-3


@dataclass
class DetuningScan:
    detunings: np.ndarray
    eta_s: np.ndarray
    eta_tot: np.ndarray
    fixed_pulse: ControlPulse = field(repr=False)
    errors: dict[int, str] = field(default_factory=dict)

    def rows(self):
        return zip(self.detunings, self.eta_s, self.eta_tot)


def default_detunings(T1: float = 1.0, max_linewidth: float = 0.0, n: int = 121) -> np.ndarray:
    """Symmetric scan, dense near resonance, reaching max(50/T1, 20 * max_linewidth)."""
    reach = max(50.0 / T1, 20.0 * max_linewidth)
    u = np.linspace(-1.0, 1.0, n)
    # sinh spacing puts a step of about reach/600 at the centre for the default size
    a = 5.0
    return reach * np.sinh(a * u) / math.sinh(a)


def _scan_point(delta, scheme, pulse, photon, grid):
    try:
        rep = dyn.evaluate(scheme.with_(delta_g=float(delta)), pulse, photon, grid).report
        return rep.eta_s, rep.eta_tot, None
    except (FloatingPointError, ValueError) as exc:
        return math.nan, math.nan, f"{type(exc).__name__}: {exc}"


def scan_detuning(scheme: LevelScheme, fixed_pulse: ControlPulse, photon: PhotonWaveform,
                  grid: SimGrid, detunings, workers: int | None = 1) -> DetuningScan:
    """Storage and retrieval efficiencies versus signal detuning delta_g under a fixed pulse.

    delta_s keeps the value carried by ``scheme``.  Failed points are recorded
    as NaN with the reason in ``errors``.
    """
    detunings = np.asarray(detunings, dtype=float)
    if detunings.ndim != 1 or detunings.size == 0:
        raise ValueError("detunings must be a non-empty 1-D sequence")
    job = partial(_scan_point, scheme=scheme, pulse=fixed_pulse, photon=photon, grid=grid)
    out = ordered_map(job, detunings, workers)
    errors = {i: err for i, (_, _, err) in enumerate(out) if err is not None}
    return DetuningScan(detunings, np.array([o[0] for o in out]), np.array([o[1] for o in out]),
                        fixed_pulse, errors)


# --------------------------------------------------------- spectral wandering

def _lorentz_moments(x, fwhm):
    """Antiderivatives of the unit Lorentzian P(x) and of x P(x)."""
    half = 0.5 * fwhm
    return np.arctan(x / half) / math.pi, half / (2 * math.pi) * np.log(x * x + half * half)


def lorentzian_weights(x, fwhm: float) -> tuple[np.ndarray, float]:
    """Weights w with sum(w * f) = int f(x) L(x) dx for f linear between nodes ``x``.

    Also returns the kernel mass that falls outside [x[0], x[-1]].
    """
    x = np.asarray(x, dtype=float)
    if np.any(np.diff(x) <= 0):
        raise ValueError("scan detunings must be strictly increasing")
    m0, m1 = _lorentz_moments(x, fwhm)
    h = np.diff(x)
    i0, i1 = np.diff(m0), np.diff(m1)
    # f on [x_k, x_k+1] = f_k (x_k+1 - x) / h + f_k+1 (x - x_k) / h
    w = np.zeros_like(x)
    w[:-1] += (x[1:] * i0 - i1) / h
    w[1:] += (i1 - x[:-1] * i0) / h
    tail = 1.0 - float(m0[-1] - m0[0])
    return w, tail


def wandering_average(scan: DetuningScan, delta_omega_add: float) -> tuple[float, float]:
    """Efficiencies averaged over a Lorentzian carrier distribution of FWHM ``delta_omega_add``.

    Efficiencies outside the scan are taken as zero; a warning reports the
    resulting bound when it exceeds 1e-3 of the average.
    """
    if delta_omega_add < 0:
        raise ValueError("added linewidth must be non-negative")
    good = np.isfinite(scan.eta_s) & np.isfinite(scan.eta_tot)
    x = scan.detunings[good]
    order = np.argsort(x)
    x, es, et = x[order], scan.eta_s[good][order], scan.eta_tot[good][order]
    if delta_omega_add == 0:
        return float(np.interp(0.0, x, es)), float(np.interp(0.0, x, et))
    w, tail = lorentzian_weights(x, delta_omega_add)
    avg_s, avg_t = float(w @ es), float(w @ et)
    bound = tail * max(es[0], es[-1], et[0], et[-1])
    if bound > TRUNCATION_TOL * max(min(avg_s, avg_t), 1e-300):
        log.warning("detuning scan [%.3g, %.3g] truncates the Lorentzian (tail mass %.2e); "
                    "error bound %.2e", x[0], x[-1], tail, bound)
    return avg_s, avg_t


# ------------------------------------------------------------- pure dephasing

@dataclass
class DephasingEnsemble:
    D_phi: float
    n_traj: int
    seed: int
    eta_s_mean: float
    eta_s_std: float
    eta_tot_mean: float
    eta_tot_std: float
    rng: str = RNG_ALGORITHM
    phase_msd: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {"D_phi": self.D_phi, "n_traj": self.n_traj, "seed": self.seed, "rng": self.rng,
                "eta_s_mean": self.eta_s_mean, "eta_s_std": self.eta_s_std,
                "eta_tot_mean": self.eta_tot_mean, "eta_tot_std": self.eta_tot_std}


def phase_tracks(grid: SimGrid, D_phi: float, n_traj: int, seed: int) -> np.ndarray:
    """Wiener phases phi(tau), shape (n_traj, n_t), with phi(0) = 0 and
    independent N(0, D_phi dt) increments."""
    if D_phi < 0:
        raise ValueError("D_phi must be non-negative")
    if n_traj < 1:
        raise ValueError("n_traj must be at least 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    steps = rng.standard_normal((n_traj, grid.n_t - 1)) * math.sqrt(D_phi * grid.dt)
    phases = np.zeros((n_traj, grid.n_t))
    np.cumsum(steps, axis=1, out=phases[:, 1:])
    return phases


def _trajectory(phase, scheme, pulse, grid, T1):
    photon = make_waveform("phase-noisy", T1, grid, phase_track=phase)
    rep = dyn.evaluate(scheme, pulse, photon, grid).report
    return rep.eta_s, rep.eta_tot


def _mean_std(values) -> tuple[float, float]:
    values = [float(v) for v in values]
    if len(values) < 2:
        return values[0], 0.0
    # statistics works in exact arithmetic, so identical samples give std 0
    return statistics.fmean(values), statistics.stdev(values)


def dephasing_monte_carlo(scheme: LevelScheme, fixed_pulse: ControlPulse, grid: SimGrid,
                          D_phi: float, n_traj: int = 100, seed: int = 0, T1: float = 1.0,
                          workers: int | None = 1) -> DephasingEnsemble:
    """Ensemble statistics of the efficiencies over phase-diffusing photons.

    All phase tracks are drawn up front from one seeded generator, so the
    result does not depend on ``workers``.  Standard deviations use the
    unbiased (n - 1) estimator.
    """
    phases = phase_tracks(grid, D_phi, n_traj, seed)
    job = partial(_trajectory, scheme=scheme, pulse=fixed_pulse, grid=grid, T1=T1)
    out = ordered_map(job, list(phases), workers)
    s_mean, s_std = _mean_std([o[0] for o in out])
    t_mean, t_std = _mean_std([o[1] for o in out])
    msd = np.mean(phases ** 2, axis=0)
    return DephasingEnsemble(D_phi, n_traj, seed, s_mean, s_std, t_mean, t_std,
                             phase_msd=msd)
