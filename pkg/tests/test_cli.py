import json
from importlib import resources

import pytest

from vtlsim.cli import main
from vtlsim.harness import ComparisonReport, benefit_pct, compare, parse_ipg_csv
from vtlsim.scenario import bundled


@pytest.fixture
def cwd(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def test_benefit_formula():
    assert round(benefit_pct(513, 398), 1) == 22.4
    assert round(benefit_pct(545, 418), 1) == 23.3


def test_run_twice_byte_identical(cwd):
    for name in ("a.json", "b.json"):
        rc = main(["run", "--scenario", "fieldtest.scenario", "--controller", "vtl",
                   "--seed", "7", "--out", name, "--trace", name + ".csv"])
        assert rc == 0
    assert (cwd / "a.json").read_bytes() == (cwd / "b.json").read_bytes()
    assert (cwd / "a.json.csv").read_bytes() == (cwd / "b.json.csv").read_bytes()
    report = json.loads((cwd / "a.json").read_text())
    assert report["controller"] == "vtl" and report["seed"] == 7


def test_ipg_csv(cwd):
    assert main(["ipg", "--packets", "2000", "--seed", "1", "--out", "ipg.csv"]) == 0
    text = (cwd / "ipg.csv").read_text()
    rows = parse_ipg_csv(text)
    assert [r[0] for r in rows] == [50.0, 100.0, 150.0, 200.0, 250.0, 300.0]
    assert rows[-1][1] == pytest.approx(1000, rel=0.3)
    assert text.splitlines()[0] == "distance_ft,mean_ipg_ms,n_received"


def test_ipg_extra_distance(cwd):
    assert main(["ipg", "--seed", "1", "--distance", "275", "--out", "ipg.csv"]) == 0
    assert [r[0] for r in parse_ipg_csv((cwd / "ipg.csv").read_text())] == \
        [50.0, 100.0, 150.0, 200.0, 250.0, 275.0, 300.0]


def test_compare_report(cwd):
    assert main(["compare", "--scenario", "fieldtest.scenario", "--seeds", "2",
                 "--out", "cmp.json"]) == 0
    rep = ComparisonReport.from_json((cwd / "cmp.json").read_text())
    assert rep.seeds == [0, 1]
    for run in rep.runs:
        for v in run["vehicles"]:
            assert v["benefit_pct"] == benefit_pct(v["stop4_time_s"], v["vtl_time_s"])
    assert rep.mean_benefit_pct == pytest.approx(sum(rep.benefits()) / 4)
    assert ComparisonReport.from_json(rep.to_json()) == rep


def test_compare_reproducible():
    sc = bundled("fieldtest")
    assert compare(sc, [3, 1]).to_json() == compare(sc, [1, 3]).to_json()


@pytest.mark.parametrize("argv", [
    [],
    ["fly"],
    ["run"],
    ["run", "--scenario", "fieldtest", "--controller", "bus"],
    ["run", "--scenario", "fieldtest", "--seed", "-1"],
    ["ipg", "--seed", "1", "--packets", "999"],
    ["ipg", "--packets", "2000"],
    ["compare", "--scenario", "fieldtest", "--seeds", "0"],
])
def test_usage_errors_exit_1(argv, cwd, capsys):
    assert main(argv) == 1
    assert "usage" in capsys.readouterr().err


def test_scenario_error_exit_2(cwd, capsys):
    (cwd / "bad.scenario").write_text('{"name": "x", "weather": 1}')
    assert main(["run", "--scenario", "bad.scenario", "--out", "r.json"]) == 2
    assert "weather" in capsys.readouterr().err
    assert main(["run", "--scenario", "missing.scenario", "--out", "r.json"]) == 2


def test_timeout_exit_3(cwd, capsys):
    doc = json.loads((resources.files("vtlsim") / "scenarios" / "fieldtest.scenario").read_text())
    doc["max_time_s"] = 10
    (cwd / "short.scenario").write_text(json.dumps(doc))
    assert main(["run", "--scenario", "short.scenario", "--out", "r.json"]) == 3
    assert "deadlock" in capsys.readouterr().err
