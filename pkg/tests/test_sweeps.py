import json

import numpy as np
import pytest

from qdmemory import optimizer as opt
from qdmemory import sweeps
from qdmemory.grid import SimGrid

TINY = dict(n_z=40, n_t=60, T=10.0, ascent=opt.AscentConfig(max_iters=4))


def base(**kw):
    return sweeps.BaseRun(**{**TINY, **kw})


@pytest.mark.parametrize("kind,points", [("optical-depth", ()), ("optical-depth", (10, 10)),
                                         ("optical-depth", (20, 10)), ("config-table", ("nope",)),
                                         ("config-table", ("4L+", "4L+")), ("spiral", (1,))])
def test_spec_validation(kind, points):
    with pytest.raises(ValueError):
        sweeps.SweepSpec(kind, points, base())


def test_default_depths():
    d = sweeps.default_depths()
    assert d[0] == 10.0 and d[-1] == 1000.0
    for v in sweeps.PULSE_PLOT_DEPTHS:
        assert v in d
    assert len(d) == 12 + len(sweeps.PULSE_PLOT_DEPTHS) - 1


def test_default_detunings_include_midpoint():
    x = sweeps.default_detunings(2.0)
    assert len(x) == 11 and x[0] == -4.0 and x[-1] == 6.0
    assert 1.0 in x


def test_warm_sweep_records_every_point():
    spec = sweeps.SweepSpec("optical-depth", (5.0, 10.0, 20.0), base())
    res = sweeps.run_sweep(spec, 1)
    assert [p["index"] for p in res.points] == [0, 1, 2]
    assert res.points[0]["init_pulse"] == "default"
    assert res.points[1]["init_pulse"] in ("warm", "default")
    assert all("cold_eta_tot" in p for p in res.points[1:])
    for p in res.points:
        assert p["status"] == "ok" and len(p["pulse"]) == 60
    assert res.provenance["catalog_version"]
    assert res.format_version == sweeps.FORMAT_VERSION


def test_failures_are_recorded(monkeypatch):
    real = opt.ascend

    def flaky(scheme, *a, **kw):
        if scheme.d == 10.0:
            raise FloatingPointError("boom")
        return real(scheme, *a, **kw)

    monkeypatch.setattr(opt, "ascend", flaky)
    spec = sweeps.SweepSpec("optical-depth", (5.0, 10.0), base(), warm_start=False)
    res = sweeps.run_sweep(spec, 1)
    assert res.points[0]["status"] == "ok"
    assert res.points[1]["status"] == "failed" and "boom" in res.points[1]["error"]
    assert res.failures == [res.points[1]]


def test_all_points_failing_fails_the_sweep():
    spec = sweeps.SweepSpec("optical-depth", (5.0, 10.0), base(), warm_start=False,
                            point_budget_s=0.0)
    with pytest.raises(RuntimeError, match="every sweep point failed"):
        sweeps.run_sweep(spec, 1)


def test_budget_records_timeout(monkeypatch):
    spec = sweeps.SweepSpec("config-table", ("ideal-3L",), base(), warm_start=False,
                            point_budget_s=-1.0)
    rec = sweeps._run_point((0, "ideal-3L"), spec)
    assert rec["status"] == "timeout"


def test_detuning_reoptimize_sets_both_detunings():
    spec = sweeps.SweepSpec("detuning-reoptimize", (-0.5, 0.5), base(scheme="4L+"))
    sc = sweeps._scheme_for(spec, 0.5)
    assert sc.delta_g == sc.delta_s == 0.5


def test_parallel_and_serial_outputs_identical(tmp_path):
    spec = sweeps.SweepSpec("config-table", ("ideal-3L", "4L+", "4L-"), base(), warm_start=False)
    sweeps.run_sweep(spec, 1).write_json(tmp_path / "a.json")
    sweeps.run_sweep(spec, 2).write_json(tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_json_and_csv_round_trip(tmp_path):
    spec = sweeps.SweepSpec("high-od", ("ideal-3L",), base(d=200.0), warm_start=False)
    res = sweeps.run_sweep(spec, 1)
    res.write_json(tmp_path / "r.json", timestamps=True)
    data = json.loads((tmp_path / "r.json").read_text())
    assert "timestamps" in data["provenance"]
    back = sweeps.SweepResult.read_json(tmp_path / "r.json")
    assert back.spec == spec
    assert back.points[0]["eta_tot"] == res.points[0]["eta_tot"]
    files = res.write_csv(tmp_path / "csv")
    assert [f.name for f in files] == ["summary.csv", "pulse_000.csv"]


def test_table_with_cross_evaluation_row():
    res = sweeps.run_table("D1-clock", 75.0, SimGrid(40, 60, 10.0), base=base())
    labels = [str(p["param"]) for p in res.points]
    assert labels == [r[0] for r in sweeps.REFERENCE_ROWS["D1-clock"]]
    cross = res.points[-1]
    assert cross["stop_reason"] == "cross-evaluated"
    assert cross["omega_m"] == pytest.approx(max(res.points[2]["pulse"]))
    with pytest.raises(ValueError):
        sweeps.run_table("D3-clock", 75.0)
    with pytest.raises(ValueError):
        sweeps.run_table("D1-clock", 0.0)


def test_power_law_fit():
    d = np.array([10.0, 30.0, 100.0])
    assert sweeps.fit_power_law(d, 3 * d ** 0.67) == pytest.approx((0.67, 3.0))
    with pytest.raises(ValueError):
        sweeps.fit_power_law([1, -1], [1, 1])
