import csv
import json
import re

import pytest

from corrlen import cli
from corrlen.errors import NumericFailure
from corrlen.scenario import Scenario

D1 = {
    "name": "d1-small",
    "norm": {"family": "ell_p", "d": 1, "p": 2},
    "prefactor": {"family": "polynomial", "alpha": 2.0},
    "directions": [[1]],
    "lambdas": [0.3, 0.7],
    "kernel": {"R": 40},
    "series": {"R": 80, "K": 200, "n_range": [10, 60]},
    "diagnostics": {"rho_cut": 0.5, "giant_n": 50},
}

D2 = {
    "name": "l1-two-directions",
    "norm": {"family": "ell_p", "d": 2, "p": 1},
    "prefactor": {"family": "constant"},
    "directions": [[1, 0], [1, 1]],
    "lambdas": [0.5],
    "kernel": {"R": 40},
}


def _write(tmp_path, doc, name="sc.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


def _read_csv(path):
    lines = path.read_text().splitlines()
    meta = [ln for ln in lines if ln.startswith("#")]
    rows = list(csv.DictReader([ln for ln in lines if not ln.startswith("#")]))
    return meta, rows


def test_geometry_outputs(tmp_path):
    sc = _write(tmp_path, D2)
    out = tmp_path / "out"
    assert cli.main(["geometry", "--scenario", str(sc), "--out", str(out)]) == 0
    meta, rows = _read_csv(out / "geometry.csv")
    assert meta[0] == f"# scenario_sha256={Scenario.load(sc).sha256}"
    assert any("numpy=" in m for m in meta) and any("isotropy_tol=" in m for m in meta)
    # l1 ball: corner along the axis, facet along the diagonal
    assert [r["g_form"] for r in rows] == ["power", "zero"]
    assert float(rows[0]["kappa"]) == pytest.approx(1.0, abs=0.05)
    doc = json.loads((out / "geometry.json").read_text())
    assert doc["meta"]["scenario_sha256"] == Scenario.load(sc).sha256


def test_precision_flag(tmp_path):
    sc = _write(tmp_path, D1)
    out = tmp_path / "out"
    assert cli.main(["saturation", "--scenario", str(sc), "--out", str(out), "--precision", "5"]) == 0
    _, rows = _read_csv(out / "saturation_phase.csv")
    assert rows[0]["lambda_sat"] == "0.45795"
    assert rows[0]["lambda_sat_exact"] == "0.45795"


def test_threads_preserve_order(tmp_path):
    sc = _write(tmp_path, D2)
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["criterion", "--scenario", str(sc), "--out", str(a)]) == 0
    assert cli.main(["criterion", "--scenario", str(sc), "--out", str(b), "--threads", "2"]) == 0
    assert (a / "criterion.csv").read_text() == (b / "criterion.csv").read_text()


def test_report_writes_figures(tmp_path):
    sc = _write(tmp_path, D1)
    out = tmp_path / "out"
    assert cli.main(["report", "--scenario", str(sc), "--out", str(out)]) == 0
    for name in ("nu_curves.png", "saturation_phase.png", "prefactor_dir0.png", "nu_curves.svg",
                 "prefactor_dir0.svg", "prefactor_phase.csv", "criterion.json"):
        assert (out / name).stat().st_size > 0
    svg = (out / "nu_curves.svg").read_text()
    data = re.search(r'data-xy="([^"]+)"', svg).group(1)
    xs = [float(p.split(",")[0]) for p in data.split()]
    assert xs == [0.3, 0.7]


@pytest.mark.parametrize("doc", [
    {**D1, "colour": "red"},
    {**D1, "lambdas": [1.5]},
    {**D1, "norm": {"family": "ell_p", "d": 1, "p": 0.2}},
    {**D1, "series": {"R": 10, "K": 5, "n_range": [5, 50]}},
])
def test_validation_exit_code(tmp_path, doc, capsys):
    sc = _write(tmp_path, doc)
    assert cli.main(["geometry", "--scenario", str(sc), "--out", str(tmp_path / "o")]) == 2
    assert "validation error" in capsys.readouterr().err


def test_missing_scenario_file(tmp_path):
    assert cli.main(["geometry", "--scenario", str(tmp_path / "nope.json")]) == 2


def test_kernel_truncation_exit_code(tmp_path):
    sc = _write(tmp_path, {**D2, "kernel": {"R": 8}})
    assert cli.main(["criterion", "--scenario", str(sc), "--out", str(tmp_path / "o")]) == 3


def test_failure_isolated_per_direction(tmp_path, monkeypatch):
    real = cli.greenfn.nu_via_tilt

    def flaky(kernel, lam, s, *a, **kw):
        if s[1] > 0:
            raise NumericFailure("synthetic failure")
        return real(kernel, lam, s, *a, **kw)

    monkeypatch.setattr(cli.greenfn, "nu_via_tilt", flaky)
    sc = _write(tmp_path, D2)
    out = tmp_path / "o"
    assert cli.main(["nu-scan", "--scenario", str(sc), "--out", str(out)]) == 3
    _, rows = _read_csv(out / "nu_scan.csv")
    assert rows[0]["error"] == "" and float(rows[0]["nu"]) > 0
    assert "synthetic failure" in rows[1]["error"]


def test_fan_and_lambda_grid():
    from corrlen.scenario import fan
    dirs = fan(2, 16)
    assert len(dirs) == 16
    assert dirs[0].tolist() == [1.0, 0.0] and dirs[-1].tolist() == [0.0, 1.0]
    sc = Scenario.from_dict({**D2, "lambdas": {"start": 0.1, "stop": 0.5, "num": 5}})
    assert sc.lambdas == pytest.approx([0.1, 0.2, 0.3, 0.4, 0.5])
