"""Multi-point studies: optical-depth sweeps, detuning scans with re-optimization,
and configuration tables, with parallel execution and JSON/CSV persistence."""
from __future__ import annotations

import csv
import json
import math
import platform
import time
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone
from functools import partial
from pathlib import Path

import numpy as np

from . import __version__
from . import optimizer as opt
from ._parallel import ordered_map
from .grid import ControlPulse, SimGrid, make_waveform
from .medium import CATALOG, CATALOG_VERSION, lookup_scheme

FORMAT_VERSION = 1
SWEEP_KINDS = ("optical-depth", "detuning-reoptimize", "config-table", "high-od")
DEFAULT_POINT_BUDGET_S = 2 * 3600.0
WARM_START_TOLERANCE = 0.01

# optical-depth grid: log-spaced plus the values used for the optimal-pulse plots
PULSE_PLOT_DEPTHS = (10.0, 26.4, 78.0, 230.0, 678.0)


def default_depths() -> list[float]:
    pts = set(np.round(np.geomspace(10.0, 1000.0, 12), 6)) | set(PULSE_PLOT_DEPTHS)
    return sorted(float(p) for p in pts)


def default_detunings(delta_e: float, n: int = 11) -> list[float]:
    """``n`` common detunings spanning [-2, 3] times the excited splitting."""
    return [float(x) for x in np.linspace(-2.0 * delta_e, 3.0 * delta_e, n)]


TABLE_ROWS = {
    "D2-stretch": [f"D2-stretch-config{k}" for k in range(1, 5)],
    "D2-clock": [f"D2-clock-config{k}" for k in range(1, 5)],
    "D1-stretch": ["D1-stretch-config1", "D1-stretch-config2"],
    "D1-clock": ["D1-clock-config1", "D1-clock-config2", "D1-clock-config3"],
}
# (pulse source, evaluated on) rows appended after the optimized ones
TABLE_CROSS_ROWS = {"D1-clock": [("D1-clock-config3", "D1-clock-config2")]}

# published optimization results at d = 75: (row, eta_s %, eta_tot %, Omega_m / gamma)
REFERENCE_ROWS = {
    "D2-stretch": [("D2-stretch-config1", 33.6, 17.3, 130.4), ("D2-stretch-config2", 30.1, 12.5, 58.5),
                   ("D2-stretch-config3", 16.6, 5.4, 18.0), ("D2-stretch-config4", 30.1, 17.4, 130.0)],
    "D2-clock": [("D2-clock-config1", 39.6, 25.4, 170.9), ("D2-clock-config2", 40.8, 25.6, 32.1),
                 ("D2-clock-config3", 15.6, 6.1, 66.8), ("D2-clock-config4", 43.4, 26.4, 43.1)],
    "D1-stretch": [("D1-stretch-config1", 23.2, 9.5, 27.2), ("D1-stretch-config2", 44.8, 28.6, 77.4)],
    "D1-clock": [("D1-clock-config1", 18.5, 9.0, 231.8), ("D1-clock-config2", 46.0, 28.9, 47.4),
                 ("D1-clock-config3", 45.7, 28.5, 45.0),
                 ("D1-clock-config3->D1-clock-config2", 45.7, 28.4, 45.0)],
}


class PointTimeout(RuntimeError):
    pass


@dataclass(frozen=True)
class BaseRun:
    """Everything a sweep point shares except the swept parameter."""
    scheme: str = "ideal-3L"
    d: float = 75.0
    delta_g: float = 0.0
    delta_s: float = 0.0
    n_z: int = 1000
    n_t: int = 1000
    T: float = 10.0
    waveform: str = "sharp-exponential"
    T1: float = 1.0
    T_L: float | None = None
    ascent: opt.AscentConfig = field(default_factory=opt.AscentConfig)

    @property
    def grid(self) -> SimGrid:
        return SimGrid(self.n_z, self.n_t, self.T)

    def photon(self):
        return make_waveform(self.waveform, self.T1, self.grid, T_L=self.T_L)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["ascent"] = self.ascent.to_dict()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "BaseRun":
        data = dict(data)
        data["ascent"] = opt.AscentConfig(**data.get("ascent", {}))
        return cls(**data)


@dataclass(frozen=True)
class SweepSpec:
    kind: str
    points: tuple
    base: BaseRun = field(default_factory=BaseRun)
    warm_start: bool = True
    check_warm_start: bool = True
    point_budget_s: float = DEFAULT_POINT_BUDGET_S

    def __post_init__(self):
        if self.kind not in SWEEP_KINDS:
            raise ValueError(f"sweep kind must be one of {SWEEP_KINDS}, got {self.kind!r}")
        pts = tuple(self.points)
        if not pts:
            raise ValueError("a sweep needs at least one point")
        if self.kind in ("config-table", "high-od"):
            unknown = [p for p in pts if p not in CATALOG]
            if unknown:
                raise ValueError(f"unknown scheme labels {unknown}")
            if len(set(pts)) != len(pts):
                raise ValueError("scheme labels must be distinct")
        else:
            pts = tuple(float(p) for p in pts)
            if any(b <= a for a, b in zip(pts, pts[1:])):
                raise ValueError("sweep points must be strictly increasing")
            if self.kind == "optical-depth" and pts[0] < 0:
                raise ValueError("optical depths must be non-negative")
            if self.base.scheme not in CATALOG:
                raise ValueError(f"unknown scheme label {self.base.scheme!r}")
        object.__setattr__(self, "points", pts)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "points": list(self.points), "base": self.base.to_dict(),
                "warm_start": self.warm_start, "check_warm_start": self.check_warm_start,
                "point_budget_s": self.point_budget_s}

    @classmethod
    def from_dict(cls, data: dict) -> "SweepSpec":
        data = dict(data)
        data["base"] = BaseRun.from_dict(data["base"])
        data["points"] = tuple(data["points"])
        return cls(**data)


@dataclass
class SweepResult:
    spec: SweepSpec
    points: list[dict]
    provenance: dict
    format_version: int = FORMAT_VERSION
    tau: list[float] = field(default_factory=list)
    table_id: str | None = None

    @property
    def failures(self) -> list[dict]:
        return [p for p in self.points if p["status"] != "ok"]

    def to_dict(self, timestamps: bool = False) -> dict:
        prov = dict(self.provenance)
        points = [dict(p) for p in self.points]
        if not timestamps:
            # wall-clock fields would make repeated runs differ byte for byte
            prov.pop("timestamps", None)
            for p in points:
                p.pop("wall_time_s", None)
        return {"format_version": self.format_version, "table_id": self.table_id,
                "spec": self.spec.to_dict(), "provenance": prov, "tau_ns": self.tau,
                "points": points}

    def write_json(self, path, timestamps: bool = False) -> None:
        Path(path).write_text(json.dumps(self.to_dict(timestamps), indent=1, allow_nan=True) + "\n")

    @classmethod
    def read_json(cls, path) -> "SweepResult":
        data = json.loads(Path(path).read_text())
        if "format_version" not in data:
            raise ValueError("sweep file has no format_version")
        return cls(SweepSpec.from_dict(data["spec"]), data["points"], data["provenance"],
                   data["format_version"], data.get("tau_ns", []), data.get("table_id"))

    def write_csv(self, directory) -> list[Path]:
        """Summary table plus one pulse file per successful point."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        written = []
        summary = directory / "summary.csv"
        cols = ["index", "label", "param", "status", "eta_s", "eta_tot", "eta_r", "omega_m",
                "iterations", "converged", "stop_reason"]
        with open(summary, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for p in self.points:
                w.writerow([p.get(c, "") for c in cols])
        written.append(summary)
        for p in self.points:
            if p.get("pulse"):
                path = directory / f"pulse_{p['index']:03d}.csv"
                with open(path, "w", newline="") as fh:
                    w = csv.writer(fh)
                    w.writerow(["tau_ns", "omega_over_gamma"])
                    w.writerows(zip(self.tau, p["pulse"]))
                written.append(path)
        return written


# ------------------------------------------------------------------ execution

def _scheme_for(spec: SweepSpec, param):
    b = spec.base
    if spec.kind == "optical-depth":
        return lookup_scheme(b.scheme, d=param, detunings=(b.delta_g, b.delta_s))
    if spec.kind == "detuning-reoptimize":
        return lookup_scheme(b.scheme, d=b.d, detunings=(param, param))
    return lookup_scheme(param, d=b.d, detunings=(b.delta_g, b.delta_s))


def _budget_callback(budget_s: float):
    start = time.monotonic()

    def check(it, point):
        if time.monotonic() - start > budget_s:
            raise PointTimeout(f"exceeded the {budget_s:.0f} s budget after {it + 1} iterations")
    return check


def _record(index, param, scheme, result, t0) -> dict:
    rep = result.report
    return {"index": index, "param": param, "label": scheme.label, "status": "ok", "error": None,
            "eta_s": rep.eta_s, "eta_tot": rep.eta_tot, "eta_r": rep.eta_r,
            "omega_m": result.omega_m, "iterations": result.iterations,
            "converged": result.converged, "stop_reason": result.stop_reason,
            "balance_defect": rep.balance_defect, "pulse": result.pulse.samples.tolist(),
            "init_pulse": "default",
            "wall_time_s": time.monotonic() - t0}


def _failure(index, param, label, exc, t0) -> dict:
    status = "timeout" if isinstance(exc, PointTimeout) else "failed"
    return {"index": index, "param": param, "label": label, "status": status,
            "error": f"{type(exc).__name__}: {exc}", "wall_time_s": time.monotonic() - t0}


def _ascend(spec: SweepSpec, scheme, init: ControlPulse | None):
    b = spec.base
    return opt.ascend(scheme, b.photon(), b.grid, init, b.ascent,
                      callback=_budget_callback(spec.point_budget_s))


def _run_point(item, spec: SweepSpec) -> dict:
    index, param = item
    t0 = time.monotonic()
    label = param if isinstance(param, str) else spec.base.scheme
    try:
        scheme = _scheme_for(spec, param)
        return _record(index, param, scheme, _ascend(spec, scheme, None), t0)
    except (ArithmeticError, ValueError, RuntimeError) as exc:
        return _failure(index, param, label, exc, t0)


def _run_chain(spec: SweepSpec) -> list[dict]:
    """Sequential warm-started pass: each point starts from its predecessor's optimum."""
    out = []
    prev = None
    for index, param in enumerate(spec.points):
        t0 = time.monotonic()
        label = param if isinstance(param, str) else spec.base.scheme
        try:
            scheme = _scheme_for(spec, param)
            warm = _ascend(spec, scheme, prev)
            rec = _record(index, param, scheme, warm, t0)
            rec["init_pulse"] = "warm" if prev is not None else "default"
            best = warm
            if spec.check_warm_start and prev is not None:
                cold = _ascend(spec, scheme, None)
                rec["cold_eta_tot"] = cold.report.eta_tot
                if cold.report.eta_tot > warm.report.eta_tot + WARM_START_TOLERANCE:
                    rec = _record(index, param, scheme, cold, t0)
                    rec["init_pulse"] = "default"
                    rec["warm_eta_tot"] = warm.report.eta_tot
                    rec["cold_eta_tot"] = cold.report.eta_tot
                    best = cold
            prev = best.pulse
            out.append(rec)
        except (ArithmeticError, ValueError, RuntimeError) as exc:
            out.append(_failure(index, param, label, exc, t0))
            prev = None
    return out


def run_sweep(spec: SweepSpec, parallelism: int | None = None) -> SweepResult:
    """Optimize every point of ``spec``.

    Cold-started points run concurrently on ``parallelism`` worker processes
    and are merged by index.  A warm-started sweep is a single sequential
    chain, so its content never depends on the worker count.  The sweep
    fails only when every point fails.
    """
    started = datetime.now(timezone.utc).isoformat()
    if spec.warm_start and spec.kind in ("optical-depth", "detuning-reoptimize"):
        records = _run_chain(spec)
    else:
        records = ordered_map(partial(_run_point, spec=spec), list(enumerate(spec.points)),
                              parallelism)
    if all(r["status"] != "ok" for r in records):
        reasons = "; ".join(r["error"] for r in records)
        raise RuntimeError(f"every sweep point failed: {reasons}")
    prov = _provenance(spec, started)
    return SweepResult(spec, records, prov, tau=spec.base.grid.tau.tolist())


def _provenance(spec: SweepSpec, started: str) -> dict:
    return {"package_version": __version__, "catalog_version": CATALOG_VERSION,
            "grid": spec.base.grid.to_dict(), "seeds": None,
            "warm_start": spec.warm_start, "python": platform.python_version(),
            "numpy": np.__version__,
            "timestamps": {"started": started,
                           "finished": datetime.now(timezone.utc).isoformat()}}


# --------------------------------------------------------------------- tables

def run_table(table_id: str, d: float = 75.0, grid: SimGrid | None = None,
              parallelism: int | None = None, base: BaseRun | None = None) -> SweepResult:
    """Optimize each configuration of one level-scheme family, then add the
    cross-evaluation rows (a pulse optimized for one row driving another)."""
    if table_id not in TABLE_ROWS:
        raise ValueError(f"table must be one of {sorted(TABLE_ROWS)}, got {table_id!r}")
    if not d > 0:
        raise ValueError("optical depth must be positive")
    base = base or BaseRun()
    if grid is not None:
        base = replace(base, n_z=grid.n_z, n_t=grid.n_t, T=grid.T)
    base = replace(base, d=float(d))
    spec = SweepSpec("config-table", tuple(TABLE_ROWS[table_id]), base, warm_start=False)
    result = run_sweep(spec, parallelism)
    result.table_id = table_id
    by_label = {p["label"]: p for p in result.points}
    for src, dst in TABLE_CROSS_ROWS.get(table_id, []):
        result.points.append(_cross_row(len(result.points), by_label.get(src), src, dst, base))
    return result


def _cross_row(index, source, src, dst, base: BaseRun) -> dict:
    t0 = time.monotonic()
    label = f"{src}->{dst}"
    if source is None or source["status"] != "ok":
        return _failure(index, label, dst, RuntimeError(f"no optimized pulse for {src}"), t0)
    grid = base.grid
    pulse = ControlPulse(grid, np.asarray(source["pulse"]))
    rep = opt.cross_evaluate(pulse, lookup_scheme(dst, d=base.d), base.photon(), grid)
    return {"index": index, "param": label, "label": dst, "status": "ok", "error": None,
            "eta_s": rep.eta_s, "eta_tot": rep.eta_tot, "eta_r": rep.eta_r,
            "omega_m": pulse.omega_m, "iterations": 0, "converged": True,
            "stop_reason": "cross-evaluated", "balance_defect": rep.balance_defect,
            "pulse": None, "init_pulse": src, "wall_time_s": time.monotonic() - t0}


def fit_power_law(x, y) -> tuple[float, float]:
    """Least-squares (exponent, prefactor) of y = a x^p in log-log space."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("power-law fit needs positive data")
    p, loga = np.polyfit(np.log(x), np.log(y), 1)
    return float(p), float(math.exp(loga))
