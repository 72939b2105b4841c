"""Forward storage, backward retrieval (adjoint) and efficiency bookkeeping."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import _kernels
from .grid import ControlPulse, FieldState, PhotonWaveform, SimGrid
from .medium import LevelScheme


class SolverInstabilityError(FloatingPointError):
    def __init__(self, index: int, where: str = "storage"):
        super().__init__(f"non-finite values in {where} solve at time index {index}")
        self.index = index


class UndefinedRetrievalError(ZeroDivisionError):
    """Raised when the stored spin wave is (numerically) empty."""


ETA_S_FLOOR = 1e-12


@dataclass
class EfficiencyReport:
    eta_s: float
    eta_r: float | None
    eta_tot: float
    leak: float
    decay_loss: float
    residual_pol: float
    balance_defect: float

    @property
    def retrieval_defined(self) -> bool:
        return self.eta_r is not None

    def to_dict(self) -> dict:
        return asdict(self)


def _kernel_args(scheme: LevelScheme, pulse: ControlPulse, grid: SimGrid):
    if pulse.grid != grid:
        raise ValueError("pulse grid does not match the simulation grid")
    om = np.ascontiguousarray(pulse.samples * scheme.gamma)
    a1 = complex(-scheme.gamma, scheme.delta_g)
    a2 = complex(-scheme.gamma, scheme.delta_g - scheme.delta_e)
    a_s = complex(0.0, scheme.delta_g - scheme.delta_s)
    return (om, grid.dz, grid.dt, scheme.coupling, scheme.mu_1g, scheme.mu_1s,
            scheme.mu_2g, scheme.mu_2s, a1, a2, a_s, scheme.is_three_level)


def _forward(scheme, pulse, e, grid, three=None):
    om, dz, dt, g, m1g, m1s, m2g, m2s, a1, a2, a_s, is3 = _kernel_args(scheme, pulse, grid)
    if three is not None:
        if three and not is3:
            raise ValueError("three-level path requested for a four-level scheme")
        is3 = three
    shape = (grid.n_t, grid.n_z)
    E = np.empty(shape, complex)
    P1 = np.zeros(shape, complex)
    P2 = np.zeros(shape, complex)
    S = np.zeros(shape, complex)
    e = np.ascontiguousarray(e, dtype=complex)
    bad = _kernels.forward_sweep(e, om, dz, dt, g, m1g, m1s, m2g, m2s, a1, a2, a_s, is3, E, P1, P2, S)
    if bad >= 0:
        raise SolverInstabilityError(bad)
    return FieldState(grid, E, P1, P2, S, "forward")


def solve_storage(scheme: LevelScheme, pulse: ControlPulse, photon: PhotonWaveform,
                  grid: SimGrid, three_level_path: bool | None = None) -> FieldState:
    """Integrate the storage equations with E(0, tau) = E_in and empty atoms at tau = 0.

    ``three_level_path`` forces (True) or forbids (False) the reduced kernel
    that skips the second polarization; by default it is used whenever both
    second-state moments vanish.
    """
    if photon.grid != grid:
        raise ValueError("photon grid does not match the simulation grid")
    return _forward(scheme, pulse, photon.samples, grid, three_level_path)


def _reverse(scheme, pulse, forward: FieldState, e, seed, store: bool):
    grid = forward.grid
    om, dz, dt, g, m1g, m1s, m2g, m2s, a1, a2, a_s, is3 = _kernel_args(scheme, pulse, grid)
    if store:
        shape = (grid.n_t, grid.n_z)
        L1, L2, LS, LE = (np.zeros(shape, complex) for _ in range(4))
    else:
        L1 = L2 = LS = LE = np.zeros((1, 1), complex)
    ebar = np.zeros(grid.n_t, complex)
    gom = np.zeros(grid.n_t)
    bad = _kernels.reverse_sweep(np.ascontiguousarray(e, dtype=complex), om, dz, dt, g, m1g, m1s,
                                 m2g, m2s, a1, a2, a_s, is3, forward.E, forward.P1, forward.P2,
                                 forward.S, np.ascontiguousarray(seed, dtype=complex), store,
                                 L1, L2, LS, LE, ebar, gom)
    if bad >= 0:
        raise SolverInstabilityError(bad, "adjoint")
    return ebar, gom, (L1, L2, LS, LE) if store else None


def solve_adjoint(scheme: LevelScheme, pulse: ControlPulse, spin_wave, grid: SimGrid,
                  forward: FieldState | None = None, photon: PhotonWaveform | None = None,
                  store_fields: bool = True) -> FieldState:
    """Backward retrieval of the spin wave ``spin_wave = S(z, T)``.

    The adjoint fields are obtained by transposing the discrete storage sweep,
    seeded with ``S_bar(z, T) = S(z, T)``, and rescaled by the quadrature
    weights so that they approximate the continuous multipliers.  The output
    photon is ``E_bar(0, tau)``.  Passing the ``forward`` storage solution
    also fills ``omega_grad``, the storage-efficiency gradient.
    """
    s_T = np.asarray(spin_wave, complex)
    if s_T.shape != (grid.n_z,):
        raise ValueError(f"spin wave needs {grid.n_z} samples, got {s_T.shape}")
    if not np.any(s_T):
        raise UndefinedRetrievalError("stored spin wave is identically zero")
    if forward is None:
        # retrieval alone does not depend on the storage fields
        empty = np.zeros((grid.n_t, grid.n_z), complex)
        forward = FieldState(grid, empty, empty, empty, empty)
        e = np.zeros(grid.n_t, complex)
        want_grad = False
    else:
        if forward.grid != grid:
            raise ValueError("forward state and grid do not match")
        e = photon.samples if photon is not None else forward.E[:, 0]
        want_grad = True
    wz, wt = grid.wz, grid.wt
    ebar, gom, fields = _reverse(scheme, pulse, forward, e, 2.0 * wz * s_T, store_fields)
    e_out = ebar / (2.0 * wt)
    if fields is not None:
        L1, L2, LS, LE = fields
        scale_z = 1.0 / (2.0 * wz)
        Pb1, Pb2, Sb = L1 * scale_z, L2 * scale_z, LS * scale_z
        Eb = LE / (2.0 * wt)[:, None]
    else:
        Pb1 = Pb2 = Sb = Eb = None
    return FieldState(grid, Eb, Pb1, Pb2, Sb, "adjoint", e_out=e_out,
                      omega_grad=gom if want_grad else None)


def energy_terms(forward: FieldState, scheme: LevelScheme) -> tuple[float, float, float, float]:
    """(leak, decay_loss, residual_pol, stored) from a forward solution."""
    grid = forward.grid
    leak = grid.integrate_t(np.abs(forward.E[:, -1]) ** 2)
    pol = np.abs(forward.P1) ** 2 + np.abs(forward.P2) ** 2
    decay = 2.0 * scheme.gamma * float(grid.wt @ pol @ grid.wz)
    residual = grid.integrate_z(pol[-1])
    stored = grid.integrate_z(np.abs(forward.S[-1]) ** 2)
    return leak, decay, residual, stored


def energy_balance(forward: FieldState, grid: SimGrid, photon: PhotonWaveform,
                   scheme: LevelScheme) -> float:
    """Closure error of the integrated continuity identity

    leak + stored + residual polarization + 2 gamma int int |P|^2 = int |E_in|^2.
    """
    leak, decay, residual, stored = energy_terms(forward, scheme)
    injected = grid.integrate_t(np.abs(photon.samples) ** 2)
    return abs(leak + stored + residual + decay - injected)


def compute_efficiencies(forward: FieldState, adjoint: FieldState | None, grid: SimGrid,
                         scheme: LevelScheme, photon: PhotonWaveform) -> EfficiencyReport:
    leak, decay, residual, eta_s = energy_terms(forward, scheme)
    injected = grid.integrate_t(np.abs(photon.samples) ** 2)
    defect = abs(leak + eta_s + residual + decay - injected)
    # efficiencies are fractions of the injected (grid) norm
    eta_s /= injected
    if adjoint is None or eta_s < ETA_S_FLOOR:
        eta_tot = 0.0 if adjoint is None else grid.integrate_t(np.abs(adjoint.e_out) ** 2) / injected
        eta_r = None
    else:
        eta_tot = grid.integrate_t(np.abs(adjoint.e_out) ** 2) / injected
        eta_r = eta_tot / eta_s
    return EfficiencyReport(eta_s, eta_r, eta_tot, leak / injected, decay / injected,
                            residual / injected, defect / injected)


@dataclass
class Evaluation:
    """Forward/adjoint pair plus report for one (scheme, pulse, photon)."""
    forward: FieldState
    adjoint: FieldState | None
    report: EfficiencyReport


def evaluate(scheme: LevelScheme, pulse: ControlPulse, photon: PhotonWaveform, grid: SimGrid,
             store_fields: bool = False) -> Evaluation:
    """Storage followed by backward retrieval under ``pulse``."""
    fwd = solve_storage(scheme, pulse, photon, grid)
    if not np.any(fwd.S[-1]):
        return Evaluation(fwd, None, compute_efficiencies(fwd, None, grid, scheme, photon))
    adj = solve_adjoint(scheme, pulse, fwd.S[-1], grid, fwd, photon, store_fields=store_fields)
    return Evaluation(fwd, adj, compute_efficiencies(fwd, adj, grid, scheme, photon))


def storage_map(scheme: LevelScheme, pulse: ControlPulse, grid: SimGrid, e) -> np.ndarray:
    """S(z, T) for an arbitrary input envelope ``e`` (no normalization)."""
    return _forward(scheme, pulse, e, grid).S[-1]


def fwm_drive_ratio_estimate(scheme: LevelScheme) -> float:
    """Scaling estimate d gamma^2 / Delta_HF^2 of the Stokes drive relative to the
    ordinary control drive of the spin wave."""
    return scheme.d * scheme.gamma ** 2 / scheme.delta_hf ** 2


# ------------------------------------------------------------ four-wave mixing

def _fwm_run(scheme: LevelScheme, pulse: ControlPulse, e, s0, grid: SimGrid, coupled: bool):
    if not scheme.is_three_level:
        raise ValueError("the Stokes-extended model is defined for three-level schemes only")
    if not scheme.delta_hf > 0:
        raise ValueError("delta_hf must be positive for the Stokes-extended model")
    om, dz, dt, g, m1g, m1s, _, _, a1, _, a_s, _ = _kernel_args(scheme, pulse, grid)
    kap = m1g * m1s * g / scheme.delta_hf if coupled else 0.0
    ls = m1g ** 2 / scheme.delta_hf if coupled else 0.0
    shape = (grid.n_t, grid.n_z)
    E, P1, S, Ep = (np.empty(shape, complex) for _ in range(4))
    bad = _kernels.fwm_sweep(np.ascontiguousarray(e, dtype=complex), om, dz, dt, g, m1g, m1s,
                             a1, a_s, kap, ls, np.ascontiguousarray(s0, dtype=complex),
                             E, P1, S, Ep)
    if bad >= 0:
        raise SolverInstabilityError(bad, "four-wave-mixing")
    return FieldState(grid, E, P1, np.zeros(shape, complex), S, "forward"), Ep, kap


def solve_storage_fwm(scheme: LevelScheme, pulse: ControlPulse, photon: PhotonWaveform,
                      grid: SimGrid) -> tuple[FieldState, np.ndarray]:
    """Storage with the control also driving the signal transition off resonance.

    Adds the Stokes field E' (returned separately, shape (n_t, n_z)) and the
    control light shifts.  Three-level schemes only.
    """
    if photon.grid != grid:
        raise ValueError("photon grid does not match the simulation grid")
    fwd, stokes, _ = _fwm_run(scheme, pulse, photon.samples, np.zeros(grid.n_z), grid, True)
    return fwd, stokes


def retrieve_backward(scheme: LevelScheme, pulse: ControlPulse, spin_wave, grid: SimGrid,
                      fwm: bool = False) -> np.ndarray:
    """Photon emitted when ``spin_wave`` is read out backwards by the time-reversed pulse.

    Simulated directly in the retrieval frame (z reversed, control reversed in
    time); with ``fwm`` the Stokes coupling and light shifts are included.
    """
    s0 = np.asarray(spin_wave, complex)[::-1]
    reversed_pulse = ControlPulse(grid, pulse.samples[::-1])
    fields, _, _ = _fwm_run(scheme, reversed_pulse, np.zeros(grid.n_t), s0, grid, fwm)
    return fields.E[:, -1]


@dataclass
class FwmCheck:
    plain: EfficiencyReport
    eta_s: float
    eta_tot: float
    ratio_estimate: float
    ratio_measured: float

    def to_dict(self) -> dict:
        out = asdict(self)
        out["plain"] = self.plain.to_dict()
        return out


def fwm_check(scheme: LevelScheme, pulse: ControlPulse, photon: PhotonWaveform,
              grid: SimGrid) -> FwmCheck:
    """Compare the plain and Stokes-extended storage plus backward retrieval.

    ``ratio_measured`` is the size of the Stokes drive of the spin wave
    relative to its control drive, both integrated over the storage window.
    """
    plain = evaluate(scheme, pulse, photon, grid).report
    fwd, stokes, kap = _fwm_run(scheme, pulse, photon.samples, np.zeros(grid.n_z), grid, True)
    injected = grid.integrate_t(np.abs(photon.samples) ** 2)
    s_T = fwd.S[-1]
    eta_s = grid.integrate_z(np.abs(s_T) ** 2) / injected
    out = retrieve_backward(scheme, pulse, s_T, grid, fwm=True)
    eta_tot = grid.integrate_t(np.abs(out) ** 2) / injected
    om = pulse.samples * scheme.gamma
    stokes_drive = np.abs(kap * om[:, None] * stokes)
    control_drive = np.abs(scheme.mu_1s * om[:, None] * fwd.P1)
    wz, wt = grid.wz, grid.wt
    denom = float(wt @ control_drive @ wz)
    measured = float(wt @ stokes_drive @ wz) / denom if denom > 0 else 0.0
    return FwmCheck(plain, eta_s, eta_tot, fwm_drive_ratio_estimate(scheme), measured)
