"""Adjoint gradients of the memory efficiencies and gradient ascent on the control."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import dynamics as dyn
from .dynamics import EfficiencyReport
from .grid import ControlPulse, FieldState, PhotonWaveform, SimGrid
from .medium import LevelScheme

log = logging.getLogger(__name__)

OBJECTIVES = ("total", "storage")


class AscentStagnationError(RuntimeError):
    def __init__(self, msg, trace):
        super().__init__(msg)
        self.trace = trace


@dataclass(frozen=True)
class AscentConfig:
    lambda_init: float = 1000.0
    wolfe_c1: float = 1e-4
    wolfe_c2: float = 0.9
    shrink: float = 0.5
    max_backoff: int = 40
    max_defect: float = 5e-3
    tol_rel: float = 1e-3
    history: int = 3
    max_iters: int = 2000
    objective: str = "storage"
    merit: str = "total"

    def __post_init__(self):
        if not 0 < self.wolfe_c1 < self.wolfe_c2 < 1:
            raise ValueError("Wolfe constants need 0 < c1 < c2 < 1")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink must lie in (0, 1)")
        if not self.tol_rel > 0:
            raise ValueError("tol_rel must be positive")
        if not self.max_defect > 0:
            raise ValueError("max_defect must be positive")
        if self.objective not in OBJECTIVES or self.merit not in OBJECTIVES:
            raise ValueError(f"objective and merit must be one of {OBJECTIVES}")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class TraceEntry:
    eta_s: float
    eta_tot: float
    step: float
    grad_norm: float
    backoffs: int
    curvature_ok: bool


@dataclass
class OptimizationResult:
    pulse: ControlPulse
    report: EfficiencyReport
    trace: list[TraceEntry]
    converged: bool
    init_pulse: ControlPulse
    config: AscentConfig
    scheme: LevelScheme | None = None
    stop_reason: str = ""

    @property
    def omega_m(self) -> float:
        return self.pulse.omega_m

    @property
    def iterations(self) -> int:
        return len(self.trace) - 1

    def summary(self) -> dict:
        r = self.report
        return {"eta_s": r.eta_s, "eta_tot": r.eta_tot, "eta_r": r.eta_r, "omega_m": self.omega_m,
                "converged": self.converged, "stop_reason": self.stop_reason,
                "iterations": self.iterations,
                "balance_defect": r.balance_defect}


# ----------------------------------------------------------------- gradients

def functional_gradient(forward: FieldState, adjoint: FieldState, scheme: LevelScheme,
                        grid: SimGrid) -> np.ndarray:
    """dJ/dOmega(tau) for J = storage efficiency, sampled on the time grid.

    Uses the exact transpose of the discrete sweep carried by ``adjoint``;
    the result is dimensionless (Omega in rad/ns, tau in ns).
    """
    if forward.grid != grid or adjoint.grid != grid:
        raise ValueError("field states and grid do not match")
    if adjoint.omega_grad is None:
        return gradient_from_fields(forward, adjoint, scheme, grid)
    return adjoint.omega_grad / grid.wt


def gradient_from_fields(forward: FieldState, adjoint: FieldState, scheme: LevelScheme,
                         grid: SimGrid) -> np.ndarray:
    """Quadrature form of the storage gradient,
    -2 int dz Im[S_bar^* (mu1s P1 + mu2s P2) - (mu1s P1_bar + mu2s P2_bar) S^*].
    """
    if forward.grid != grid or adjoint.grid != grid:
        raise ValueError("field states and grid do not match")
    if adjoint.S is None:
        raise ValueError("adjoint state carries no fields")
    m1, m2 = scheme.mu_1s, scheme.mu_2s
    integrand = (np.conj(adjoint.S) * (m1 * forward.P1 + m2 * forward.P2)
                 - (m1 * adjoint.P1 + m2 * adjoint.P2) * np.conj(forward.S))
    return -2.0 * (integrand.imag @ grid.wz)


@dataclass
class _Point:
    x: np.ndarray
    report: EfficiencyReport
    dJ: np.ndarray | None = None  # d objective / d pulse sample (gamma units)
    e_out: np.ndarray | None = None


class _Problem:
    """Objective evaluations for one (scheme, photon, grid)."""

    def __init__(self, scheme, photon, grid, objective):
        self.scheme, self.photon, self.grid, self.objective = scheme, photon, grid, objective
        self.injected = grid.integrate_t(np.abs(photon.samples) ** 2)
        self.n_solves = 0

    def value(self, point: _Point) -> float:
        return point.report.eta_tot if self.objective == "total" else point.report.eta_s

    def evaluate(self, x, with_grad: bool) -> _Point:
        sc, g, ph = self.scheme, self.grid, self.photon
        pulse = ControlPulse(g, x)
        fwd = dyn.solve_storage(sc, pulse, ph, g)
        self.n_solves += 1
        s_T = fwd.S[-1]
        if not np.any(s_T):
            rep = dyn.compute_efficiencies(fwd, None, g, sc, ph)
            return _Point(x, rep, np.zeros_like(x) if with_grad else None)
        need_adjoint = with_grad or self.objective == "total"
        if not need_adjoint:
            return _Point(x, dyn.compute_efficiencies(fwd, None, g, sc, ph))
        adj = dyn.solve_adjoint(sc, pulse, s_T, g, fwd, ph, store_fields=False)
        rep = dyn.compute_efficiencies(fwd, adj, g, sc, ph)
        if not (rep.eta_s <= 1.0 + 1e-6 and rep.eta_tot <= 1.0 + 1e-6):
            # unphysical growth: the explicit stepping has gone unstable
            raise dyn.SolverInstabilityError(-1, "storage/retrieval")
        dJ = None
        if with_grad:
            if self.objective == "storage":
                dJ = adj.omega_grad * sc.gamma / self.injected
            else:
                dJ = _total_gradient(sc, pulse, fwd, adj, ph) * sc.gamma / self.injected
        return _Point(x, rep, dJ, adj.e_out)


def _total_gradient(scheme, pulse, fwd, adj, photon) -> np.ndarray:
    """d eta_tot / d Omega_n (unnormalized) from two extra sweeps.

    With u = A e and v = A^dagger u (the retrieved photon),
    d|v|^2 = 2 Re<u, dA v> + 2 Re<A v, dA e>.
    """
    grid = fwd.grid
    wz = grid.wz
    v = adj.e_out
    fwd_v = dyn._forward(scheme, pulse, v, grid)
    u = fwd.S[-1]
    _, g1, _ = dyn._reverse(scheme, pulse, fwd_v, v, 2.0 * wz * u, False)
    _, g2, _ = dyn._reverse(scheme, pulse, fwd, photon.samples, 2.0 * wz * fwd_v.S[-1], False)
    return g1 + g2


def objective_gradient(scheme: LevelScheme, pulse: ControlPulse, photon: PhotonWaveform,
                       grid: SimGrid, objective: str = "total") -> tuple[float, np.ndarray]:
    """(value, dJ/dOmega(tau)) for ``objective`` in {"total", "storage"}.

    The gradient is the functional derivative (per ns, Omega in rad/ns).
    """
    prob = _Problem(scheme, photon, grid, objective)
    pt = prob.evaluate(pulse.samples, True)
    return prob.value(pt), pt.dJ / scheme.gamma / grid.wt


# ------------------------------------------------------------------ ascent

def default_init_pulse(grid: SimGrid, T1: float = 1.0, amplitude: float = 10.0) -> ControlPulse:
    """Gaussian trial pulse of width T1 and height ``amplitude`` (gamma) centred at
    2 T1, or mid-window if that is earlier.  Starting later than a few T1
    leaves the ascent in a poor local optimum once the photon has passed."""
    return ControlPulse.gaussian(grid, amplitude=amplitude, center=min(2.0 * T1, 0.5 * grid.T),
                                 width=T1)


def ascend(scheme: LevelScheme, photon: PhotonWaveform, grid: SimGrid,
           init_pulse: ControlPulse | None = None, cfg: AscentConfig | None = None,
           callback=None) -> OptimizationResult:
    """Gradient ascent Omega <- Omega + lambda dJ/dOmega with a backtracking Wolfe search.

    ``cfg.objective`` picks the gradient that sets the direction and
    ``cfg.merit`` the efficiency that must increase.  When no step along the
    objective gradient raises the merit, the ascent carries on along the
    merit gradient instead.  The step starts at
    ``cfg.lambda_init`` every iteration (units of gamma per unit gradient,
    time in ns) and is halved until the merit shows sufficient increase; the
    curvature condition is checked at the accepted point and recorded.  Trial
    pulses whose energy balance misses by more than ``cfg.max_defect`` (or
    ten times the starting defect, if larger) are rejected, which keeps the
    ascent from exploiting discretization error.  Stops
    once the merit improves by less than ``tol_rel`` times its value over the
    mean of the previous ``history`` values.
    """
    cfg = cfg or AscentConfig()
    init_pulse = init_pulse or default_init_pulse(grid, photon.T1)
    if init_pulse.grid != grid:
        init_pulse = init_pulse.resample(grid)
    prob = _Problem(scheme, photon, grid, cfg.objective)
    # step acts on Omega/gamma against the gradient per ns
    wt = grid.wt
    cur = prob.evaluate(init_pulse.samples.copy(), True)
    trace = [TraceEntry(cur.report.eta_s, cur.report.eta_tot, 0.0,
                        _norm(cur.dJ, wt), 0, True)]
    def merit(p):
        return p.report.eta_tot if cfg.merit == "total" else p.report.eta_s

    history = [merit(cur)]
    # coarse grids start with a sizeable defect; only growth beyond it signals exploitation
    defect_cap = max(cfg.max_defect, 10.0 * cur.report.balance_defect)
    reason = "max-iters"
    switched = False
    for it in range(cfg.max_iters):
        direction = cur.dJ / wt
        slope = float(cur.dJ @ direction)
        if not slope > 0 or not math.isfinite(slope):
            reason = "zero-gradient"
            break
        j0 = merit(cur)
        lam = cfg.lambda_init
        accepted = None
        for k in range(cfg.max_backoff + 1):
            x_new = cur.x + lam * direction
            try:
                trial = prob.evaluate(x_new, prob.objective == "storage")
            except dyn.SolverInstabilityError:
                # an overshooting step; treat like any rejected trial
                lam *= cfg.shrink
                continue
            if trial.report.balance_defect > defect_cap:
                # the grid no longer resolves this pulse; its efficiencies are not trustworthy
                lam *= cfg.shrink
                continue
            if merit(trial) >= j0 + cfg.wolfe_c1 * lam * slope:
                if trial.dJ is None:
                    trial = prob.evaluate(x_new, True)
                curv = float(trial.dJ @ direction) <= cfg.wolfe_c2 * slope
                accepted = (trial, k, curv)
                break
            lam *= cfg.shrink
        if accepted is None:
            if prob.objective == cfg.merit:
                raise AscentStagnationError(
                    f"line search failed after {cfg.max_backoff} reductions at iteration {it}",
                    trace)
            # the objective gradient no longer raises the merit; follow the merit's own
            log.info("switching ascent direction to the %s gradient at iteration %d",
                     cfg.merit, it)
            prob.objective = cfg.merit
            cur = prob.evaluate(cur.x, True)
            switched = True
            continue
        cur, k, curv = accepted
        trace.append(TraceEntry(cur.report.eta_s, cur.report.eta_tot, lam, _norm(cur.dJ, wt), k, curv))
        if callback is not None:
            callback(it, cur)
        eta = merit(cur)
        if len(history) >= cfg.history:
            ref = float(np.mean(history[-cfg.history:]))
            if eta - ref < cfg.tol_rel * eta:
                history.append(eta)
                reason = "tolerance"
                break
        history.append(eta)
    final = ControlPulse(grid, cur.x)
    tail = abs(final.samples[-1]) / max(np.max(np.abs(final.samples)), 1e-300)
    if tail > 0.05:
        log.warning("optimized pulse has not decayed at the window edge (%.3g of peak); "
                    "consider a longer window", tail)
    ev = dyn.evaluate(scheme, final, photon, grid)
    if switched:
        reason += " (after direction switch)"
    return OptimizationResult(final, ev.report, trace, reason != "max-iters", init_pulse, cfg,
                              scheme, reason)


def _norm(dJ, wt) -> float:
    return float(np.sqrt(np.sum(dJ ** 2 / wt))) if dJ is not None else 0.0


def cross_evaluate(pulse_from: OptimizationResult | ControlPulse, scheme_to: LevelScheme,
                   photon: PhotonWaveform, grid: SimGrid) -> EfficiencyReport:
    """Efficiencies of ``scheme_to`` driven by a pulse optimized elsewhere."""
    pulse = pulse_from.pulse if isinstance(pulse_from, OptimizationResult) else pulse_from
    return dyn.evaluate(scheme_to, pulse.resample(grid), photon, grid).report
