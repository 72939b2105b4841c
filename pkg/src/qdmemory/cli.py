"""Command-line entry point.

Every JSON artifact carries ``format_version`` and the fully resolved run
configuration under ``"config"``; passing such a file back through
``--config`` reproduces the run.  Exit codes: 0 success, 1 solver failure,
2 invalid input, 3 optimization did not converge.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import logging
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from . import __version__
from . import dynamics as dyn
from . import noise
from . import optimizer as opt
from . import sweeps
from ._parallel import WORKERS_ENV
from .grid import ControlPulse, SimGrid, make_waveform, read_pulse_csv, write_complex_csv, write_real_csv
from .medium import CatalogError, export_catalog_csv, lookup_scheme

FORMAT_VERSION = sweeps.FORMAT_VERSION
EXIT_OK, EXIT_SOLVER, EXIT_INPUT, EXIT_NOT_CONVERGED = 0, 1, 2, 3

log = logging.getLogger("qdmemory")

# INI section of each RunConfig field
_SECTIONS = {
    "scheme": ["scheme", "d", "delta_g", "delta_s"],
    "grid": ["n_z", "n_t", "T"],
    "waveform": ["waveform", "T1", "T_L"],
    "ascent": ["lambda_init", "wolfe_c1", "wolfe_c2", "shrink", "max_backoff", "tol_rel",
               "history", "max_iters", "objective", "merit", "max_defect"],
    "noise": ["seed", "n_traj"],
}
_ASCENT_FIELDS = _SECTIONS["ascent"]


@dataclass(frozen=True)
class RunConfig:
    """Resolved parameters of one invocation (detunings in rad/ns, times in ns)."""
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
    lambda_init: float = opt.AscentConfig.lambda_init
    wolfe_c1: float = opt.AscentConfig.wolfe_c1
    wolfe_c2: float = opt.AscentConfig.wolfe_c2
    shrink: float = opt.AscentConfig.shrink
    max_backoff: int = opt.AscentConfig.max_backoff
    tol_rel: float = opt.AscentConfig.tol_rel
    history: int = opt.AscentConfig.history
    max_iters: int = opt.AscentConfig.max_iters
    objective: str = opt.AscentConfig.objective
    merit: str = opt.AscentConfig.merit
    max_defect: float = opt.AscentConfig.max_defect
    seed: int = 0
    n_traj: int = 100

    @property
    def grid(self) -> SimGrid:
        return SimGrid(self.n_z, self.n_t, self.T)

    @property
    def ascent(self) -> opt.AscentConfig:
        return opt.AscentConfig(**{k: getattr(self, k) for k in _ASCENT_FIELDS})

    def scheme_obj(self):
        return lookup_scheme(self.scheme, d=self.d, detunings=(self.delta_g, self.delta_s))

    def photon(self):
        return make_waveform(self.waveform, self.T1, self.grid, T_L=self.T_L)

    def base_run(self) -> sweeps.BaseRun:
        return sweeps.BaseRun(self.scheme, self.d, self.delta_g, self.delta_s, self.n_z, self.n_t,
                              self.T, self.waveform, self.T1, self.T_L, self.ascent)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        cp.optionxform = str
        for section, keys in _SECTIONS.items():
            cp[section] = {k: _ini_value(getattr(self, k)) for k in keys}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def coerce(cls, values: dict) -> "RunConfig":
        types = {f.name: f.type for f in fields(cls)}
        out = {}
        for key, raw in values.items():
            if key not in types:
                raise ValueError(f"unknown configuration key {key!r}")
            out[key] = _parse(raw, types[key], key)
        return cls(**out)


def _ini_value(v) -> str:
    return "" if v is None else repr(v) if isinstance(v, float) else str(v)


def _parse(raw, typ: str, key: str):
    if raw is None or (isinstance(raw, str) and raw.strip() == "" and "None" in typ):
        return None
    try:
        if typ.startswith("float"):
            return float(raw)
        if typ == "int":
            if isinstance(raw, float) and not raw.is_integer():
                raise ValueError
            return int(raw)
    except (TypeError, ValueError):
        raise ValueError(f"configuration key {key!r} expects {typ}, got {raw!r}") from None
    return str(raw)


def load_config_file(path) -> dict:
    """Values from an INI file or from the ``config`` block of a JSON artifact."""
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError:
        cp = configparser.ConfigParser()
        cp.optionxform = str
        cp.read_string(text)
        out = {}
        for section in cp.sections():
            if section not in _SECTIONS:
                raise ValueError(f"unknown configuration section [{section}]")
            out.update(cp[section])
        return out
    if not isinstance(data, dict) or "config" not in data:
        raise ValueError(f"{path} has no 'config' block")
    return data["config"]


# ------------------------------------------------------------------ reports

class ReportError(ValueError):
    pass


def render_report(results: sweeps.SweepResult, reference: str = "none") -> tuple[str, str]:
    """Computed rows next to published ones as (text, csv).

    Efficiencies are shown in percent.  The pass band is 1 point on grids of
    3000 x 3000 or finer and 2 points otherwise; Omega_m must match to 10 %.
    """
    pts = results.points
    if reference == "none":
        header = ["row", "status", "eta_s %", "eta_tot %", "Omega_m"]
        rows = [[str(p["param"]), p["status"], _pct(p.get("eta_s")), _pct(p.get("eta_tot")),
                 _num(p.get("omega_m"))] for p in pts]
        return _table(header, rows), _csv(header, rows)
    if reference not in sweeps.REFERENCE_ROWS:
        raise ReportError(f"reference must be 'none' or one of {sorted(sweeps.REFERENCE_ROWS)}")
    grid = results.spec.base.grid
    band = 1.0 if min(grid.n_z, grid.n_t) >= 3000 else 2.0
    by_param = {str(p["param"]): p for p in pts}
    header = ["row", "eta_s %", "ref", "diff", "eta_tot %", "ref", "diff", "Omega_m", "ref",
              "rel diff", "pass"]
    rows = []
    for label, ref_s, ref_t, ref_om in sweeps.REFERENCE_ROWS[reference]:
        p = by_param.get(label)
        if p is None:
            raise ReportError(f"results have no row {label!r} required by {reference}")
        if p["status"] != "ok":
            rows.append([label, "-", _num(ref_s), "-", "-", _num(ref_t), "-", "-", _num(ref_om),
                         "-", p["status"]])
            continue
        es, et = 100 * p["eta_s"], 100 * p["eta_tot"]
        rel = (p["omega_m"] - ref_om) / ref_om
        ok = abs(es - ref_s) <= band and abs(et - ref_t) <= band and abs(rel) <= 0.10
        rows.append([label, f"{es:.1f}", _num(ref_s), f"{es - ref_s:+.1f}", f"{et:.1f}",
                     _num(ref_t), f"{et - ref_t:+.1f}", f"{p['omega_m']:.1f}", _num(ref_om),
                     f"{100 * rel:+.0f}%", "PASS" if ok else "FAIL"])
    text = _table(header, rows) + f"\ntolerance: +-{band:g} points, Omega_m +-10%\n"
    return text, _csv(header, rows)


def _pct(v):
    return "-" if v is None else f"{100 * v:.1f}"


def _num(v):
    return "-" if v is None else f"{v:.1f}"


def _table(header, rows) -> str:
    widths = [max(len(str(r[i])) for r in [header] + rows) for i in range(len(header))]
    fmt = "  ".join(f"{{:>{w}}}" for w in widths)
    return "\n".join(fmt.format(*map(str, r)) for r in [header] + rows) + "\n"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


# ------------------------------------------------------------------- parser

def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _add_run_options(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("run configuration (overrides --config)")
    g.add_argument("--config", help="INI file, or a JSON artifact whose config block is reused")
    g.add_argument("--scheme")
    g.add_argument("--d", type=float, help="optical depth")
    g.add_argument("--delta-g", dest="delta_g", type=float, help="signal detuning, rad/ns")
    g.add_argument("--delta-s", dest="delta_s", type=float, help="two-photon detuning, rad/ns")
    g.add_argument("--n-z", dest="n_z", type=int)
    g.add_argument("--n-t", dest="n_t", type=int)
    g.add_argument("--T", dest="T", type=float, help="time window, ns")
    g.add_argument("--waveform")
    g.add_argument("--T1", dest="T1", type=float, help="photon decay time, ns")
    g.add_argument("--T-L", dest="T_L", type=float, help="loading time, ns")
    g.add_argument("--lambda-init", dest="lambda_init", type=float)
    g.add_argument("--tol-rel", dest="tol_rel", type=float)
    g.add_argument("--max-iters", dest="max_iters", type=int)
    g.add_argument("--objective", choices=opt.OBJECTIVES)
    g.add_argument("--merit", choices=opt.OBJECTIVES)
    g.add_argument("--seed", type=int)
    g.add_argument("--n-traj", dest="n_traj", type=int)
    p.add_argument("--out", help="write the JSON result here instead of stdout")
    p.add_argument("--csv", help="directory for CSV data files")


def _add_workers(p):
    p.add_argument("--workers", type=int,
                   help=f"worker processes (default: ${WORKERS_ENV} or 1)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qdmemory", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="storage and retrieval under a given pulse")
    _add_run_options(p)
    p.add_argument("--pulse", help="pulse CSV (tau_ns, Omega/gamma); default trial pulse if absent")

    p = sub.add_parser("optimize", help="gradient ascent on the control pulse")
    _add_run_options(p)
    p.add_argument("--init-pulse", dest="init_pulse")
    p.add_argument("--dump-trace", dest="dump_trace", help="CSV of the per-iteration trace")
    p.add_argument("--dump-pulse", dest="dump_pulse", help="CSV of the optimized pulse")

    p = sub.add_parser("sweep", help="optimize over a list of points")
    _add_run_options(p)
    _add_workers(p)
    p.add_argument("--kind", choices=sweeps.SWEEP_KINDS, default="optical-depth")
    p.add_argument("--points", help="comma-separated values, or scheme labels for table kinds")
    p.add_argument("--fine", action="store_true",
                   help="detuning scan in steps of one twentieth of the excited splitting")
    p.add_argument("--no-warm-start", dest="warm_start", action="store_false")
    p.add_argument("--point-budget", dest="point_budget", type=float,
                   default=sweeps.DEFAULT_POINT_BUDGET_S, help="seconds per point")
    p.add_argument("--timestamps", action="store_true", help="include wall-clock fields")

    p = sub.add_parser("table", help="optimize every configuration of a scheme family")
    _add_run_options(p)
    _add_workers(p)
    p.add_argument("--table", required=True, choices=sorted(sweeps.TABLE_ROWS))
    p.add_argument("--timestamps", action="store_true")

    p = sub.add_parser("noise", help="imperfect-photon studies under a fixed pulse")
    nsub = p.add_subparsers(dest="noise_command", required=True)
    q = nsub.add_parser("wander", help="average over Lorentzian carrier wandering")
    _add_run_options(q)
    _add_workers(q)
    q.add_argument("--pulse", help="fixed pulse CSV; optimized on the fly if absent")
    q.add_argument("--linewidths", type=_floats, default=None,
                   help="added FWHM values, rad/ns (default: multiples of 1/T1)")
    q.add_argument("--scan-points", dest="scan_points", type=int, default=121)
    q = nsub.add_parser("dephase", help="phase-diffusion Monte Carlo")
    _add_run_options(q)
    _add_workers(q)
    q.add_argument("--pulse")
    q.add_argument("--d-phi", dest="d_phi", type=_floats, required=True,
                   help="diffusion constants, rad^2/ns")

    p = sub.add_parser("fwm-check", help="estimate four-wave-mixing contamination")
    _add_run_options(p)
    p.add_argument("--pulse")

    p = sub.add_parser("catalog", help="level-scheme catalog")
    csub = p.add_subparsers(dest="catalog_command", required=True)
    q = csub.add_parser("export", help="write the catalog as CSV")
    q.add_argument("--out")

    p = sub.add_parser("report", help="render a sweep or table result")
    p.add_argument("results", help="JSON written by sweep or table")
    p.add_argument("--reference", default="none",
                   choices=["none"] + sorted(sweeps.REFERENCE_ROWS))
    p.add_argument("--csv", help="also write the report as CSV here")
    return ap


def resolve_config(args) -> RunConfig:
    values = load_config_file(args.config) if getattr(args, "config", None) else {}
    values = dict(values)
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = v
    return RunConfig.coerce(values)


# ----------------------------------------------------------------- commands

def _emit(args, payload: dict) -> None:
    text = json.dumps(payload, indent=1) + "\n"
    if getattr(args, "out", None):
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _artifact(command: str, cfg: RunConfig, result, **extra) -> dict:
    out = {"format_version": FORMAT_VERSION, "command": command, "config": cfg.to_dict(),
           "result": result}
    out.update(extra)
    return out


def _csv_dir(args) -> Path | None:
    if not getattr(args, "csv", None):
        return None
    d = Path(args.csv)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _fixed_pulse(args, cfg: RunConfig, scheme, photon) -> tuple[ControlPulse, str]:
    if args.pulse:
        return read_pulse_csv(args.pulse, cfg.grid), args.pulse
    res = opt.ascend(scheme, photon, cfg.grid, cfg=cfg.ascent)
    return res.pulse, "optimized"


def cmd_solve(args, cfg: RunConfig) -> int:
    grid, scheme, photon = cfg.grid, cfg.scheme_obj(), cfg.photon()
    pulse = read_pulse_csv(args.pulse, grid) if args.pulse else opt.default_init_pulse(grid, cfg.T1)
    ev = dyn.evaluate(scheme, pulse, photon, grid)
    _emit(args, _artifact("solve", cfg, ev.report.to_dict(),
                          pulse=args.pulse or "default"))
    d = _csv_dir(args)
    if d is not None:
        s_T = ev.forward.S[-1]
        _write_rows(d / "spin_wave.csv", ["z", "re", "im"], zip(grid.z, s_T.real, s_T.imag))
        if ev.adjoint is not None:
            write_complex_csv(d / "retrieved.csv", grid, ev.adjoint.e_out)
    return EXIT_OK


def cmd_optimize(args, cfg: RunConfig) -> int:
    grid, scheme, photon = cfg.grid, cfg.scheme_obj(), cfg.photon()
    init = read_pulse_csv(args.init_pulse, grid) if args.init_pulse else None
    res = opt.ascend(scheme, photon, grid, init, cfg.ascent)
    _emit(args, _artifact("optimize", cfg, res.summary(), init_pulse=args.init_pulse or "default"))
    if args.dump_pulse:
        write_real_csv(args.dump_pulse, grid, res.pulse.samples, ("tau_ns", "omega_over_gamma"))
    if args.dump_trace:
        with open(args.dump_trace, "w", newline="") as fh:
            w = csv.writer(fh)
            cols = ["eta_s", "eta_tot", "step", "grad_norm", "backoffs", "curvature_ok"]
            w.writerow(["iteration"] + cols)
            for i, t in enumerate(res.trace):
                w.writerow([i] + [getattr(t, c) for c in cols])
    d = _csv_dir(args)
    if d is not None:
        write_real_csv(d / "pulse.csv", grid, res.pulse.samples, ("tau_ns", "omega_over_gamma"))
    if not res.converged:
        log.error("ascent stopped at max_iters=%d without meeting the tolerance", cfg.max_iters)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _sweep_points(args, cfg: RunConfig):
    if args.points:
        raw = [x.strip() for x in args.points.split(",") if x.strip()]
        if args.kind in ("config-table", "high-od"):
            return tuple(raw)
        return tuple(_floats(args.points))
    if args.kind == "optical-depth":
        return tuple(sweeps.default_depths())
    if args.kind == "detuning-reoptimize":
        delta_e = cfg.scheme_obj().delta_e
        if not delta_e > 0:
            raise ValueError(f"{cfg.scheme} has no excited splitting to scale the scan")
        return tuple(sweeps.default_detunings(delta_e, 101 if args.fine else 11))
    raise ValueError(f"--points is required for kind {args.kind}")


def _write_sweep(args, cfg, result: sweeps.SweepResult, command: str) -> None:
    payload = result.to_dict(timestamps=args.timestamps)
    payload["command"] = command
    payload["config"] = cfg.to_dict()
    _emit(args, payload)
    d = _csv_dir(args)
    if d is not None:
        result.write_csv(d)


def cmd_sweep(args, cfg: RunConfig) -> int:
    spec = sweeps.SweepSpec(args.kind, _sweep_points(args, cfg), cfg.base_run(),
                            warm_start=args.warm_start, point_budget_s=args.point_budget)
    result = sweeps.run_sweep(spec, args.workers)
    _write_sweep(args, cfg, result, "sweep")
    return EXIT_OK


def cmd_table(args, cfg: RunConfig) -> int:
    result = sweeps.run_table(args.table, cfg.d, cfg.grid, args.workers, base=cfg.base_run())
    _write_sweep(args, cfg, result, "table")
    text, _ = render_report(result, args.table)
    sys.stderr.write(text)
    return EXIT_OK


def cmd_noise(args, cfg: RunConfig) -> int:
    grid, scheme, photon = cfg.grid, cfg.scheme_obj(), cfg.photon()
    pulse, source = _fixed_pulse(args, cfg, scheme, photon)
    d = _csv_dir(args)
    if args.noise_command == "wander":
        widths = args.linewidths
        if widths is None:
            widths = [k / cfg.T1 for k in (0.0, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0)]
        if any(w < 0 for w in widths):
            raise ValueError("linewidths must be non-negative")
        det = noise.default_detunings(cfg.T1, max(widths), args.scan_points)
        scan = noise.scan_detuning(scheme, pulse, photon, grid, det, args.workers)
        rows = []
        for w in widths:
            es, et = noise.wandering_average(scan, w)
            rows.append({"delta_omega_add": w, "eta_s": es, "eta_tot": et})
        result = {"averages": rows, "scan_errors": {str(k): v for k, v in scan.errors.items()},
                  "scan": {"detuning": scan.detunings.tolist(), "eta_s": scan.eta_s.tolist(),
                           "eta_tot": scan.eta_tot.tolist()}}
        if d is not None:
            _write_rows(d / "scan.csv", ["detuning", "eta_s", "eta_tot"], scan.rows())
            _write_rows(d / "wander.csv", ["delta_omega_add", "eta_s", "eta_tot"],
                        [(r["delta_omega_add"], r["eta_s"], r["eta_tot"]) for r in rows])
    else:
        if any(x < 0 for x in args.d_phi):
            raise ValueError("D_phi values must be non-negative")
        ens = [noise.dephasing_monte_carlo(scheme, pulse, grid, x, cfg.n_traj, cfg.seed, cfg.T1,
                                           args.workers) for x in args.d_phi]
        result = {"ensembles": [e.to_dict() for e in ens]}
        if d is not None:
            cols = ["D_phi", "n_traj", "seed", "eta_s_mean", "eta_s_std", "eta_tot_mean",
                    "eta_tot_std"]
            _write_rows(d / "dephase.csv", cols, [[e.to_dict()[c] for c in cols] for e in ens])
    _emit(args, _artifact(f"noise {args.noise_command}", cfg, result, pulse=source))
    return EXIT_OK


def cmd_fwm(args, cfg: RunConfig) -> int:
    grid, scheme, photon = cfg.grid, cfg.scheme_obj(), cfg.photon()
    pulse, source = _fixed_pulse(args, cfg, scheme, photon)
    chk = dyn.fwm_check(scheme, pulse, photon, grid)
    _emit(args, _artifact("fwm-check", cfg, chk.to_dict(), pulse=source))
    return EXIT_OK


def cmd_catalog(args) -> int:
    text = export_catalog_csv()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_report(args) -> int:
    result = sweeps.SweepResult.read_json(args.results)
    text, table = render_report(result, args.reference)
    sys.stdout.write(text)
    if args.csv:
        Path(args.csv).write_text(table)
    return EXIT_OK


def _write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "catalog":
            return cmd_catalog(args)
        if args.command == "report":
            return cmd_report(args)
        cfg = resolve_config(args)
        if getattr(args, "workers", None) is not None and args.workers < 1:
            raise ValueError("--workers must be at least 1")
        handler = {"solve": cmd_solve, "optimize": cmd_optimize, "sweep": cmd_sweep,
                   "table": cmd_table, "noise": cmd_noise, "fwm-check": cmd_fwm}[args.command]
        return handler(args, cfg)
    except (dyn.SolverInstabilityError, opt.AscentStagnationError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ValueError, CatalogError, FileNotFoundError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_INPUT
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
