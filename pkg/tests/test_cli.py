import json
import math
from pathlib import Path

import pytest
from click.testing import CliRunner

from oscdecay.cli import cli
from oscdecay.decayfit import CSV_HEADER, DecaySample, octave_ladder, write_csv

DATA = Path(__file__).parent / "data"


@pytest.fixture
def run():
    runner = CliRunner()

    def invoke(*args):
        return runner.invoke(cli, [str(a) for a in args], catch_exceptions=False)

    return invoke


def _approx_equal(a, b):
    if isinstance(a, float) or isinstance(b, float):
        return math.isclose(a, b, rel_tol=1e-9, abs_tol=1e-12)
    if isinstance(a, dict):
        return a.keys() == b.keys() and all(_approx_equal(a[k], b[k]) for k in a)
    if isinstance(a, list):
        return len(a) == len(b) and all(_approx_equal(x, y) for x, y in zip(a, b))
    return a == b


# --- analyze -------------------------------------------------------------------------


def test_analyze_separable_matches_golden(run):
    res = run("analyze", DATA / "separable.phase")
    assert res.exit_code == 0
    got = json.loads(res.output)
    golden = json.loads((DATA / "separable_analysis.golden.json").read_text())
    assert _approx_equal(got, golden)
    note = got["annotations"][0]["annotation"]
    assert "6/5 <= p <= 6" in note and "[3/2, 3]" in note
    assert '"is not necessary to guarantee the sharp decay"' in note


def test_analyze_coupled(run):
    got = json.loads(run("analyze", DATA / "coupled.phase").output)
    assert got["newton_distance"] == "2/3" and got["sharp_range"] == ["3/2", "3"]
    assert got["rank_one"]["verdict"] == "pass"
    assert got["norm_hypothesis"]["verdict"] == "fail"
    assert got["theorem_A_applicable"] is False
    assert got["annotations"][0]["id"] == "coupled-sextic"


def test_analyze_errors(run, tmp_path):
    res = run("analyze", DATA / "pure_x.phase")
    assert res.exit_code == 2 and "O^d" in res.output
    assert run("analyze", tmp_path / "missing.phase").exit_code == 1
    bad = tmp_path / "bad.phase"
    bad.write_text("dim=1\nx1*y1\n")
    assert run("analyze", bad).exit_code == 2
    bad.write_text("n=1\nx1*y1 + x1^2*y1\n")
    assert run("analyze", bad).exit_code == 2


def test_analyze_is_deterministic(run, tmp_path):
    a = run("--out-dir", tmp_path, "analyze", DATA / "flagship.phase", "-o", "a.json")
    b = run("--out-dir", tmp_path, "analyze", DATA / "flagship.phase", "-o", "b.json")
    assert a.exit_code == b.exit_code == 0
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


# --- predict -------------------------------------------------------------------------


def test_predict_examples(run):
    got = json.loads(run("predict", "--d", 6, "--n", 2, "--p", 2).output)
    assert got["exponent"] == "1/3" and got["sharpness"] == "sharp"
    got = json.loads(run("predict", "--d", 6, "--n", 2, "--p", 3).output)
    assert (got["exponent"], got["log_exponent"], got["sharpness"]) == ("1/3", "2/3", "almost_sharp")
    assert run("predict", "--d", 4, "--n", 2, "--p", 2).exit_code == 2
    got = json.loads(run("predict", "--d", 4, "--n", 2, "--p", 2, "--allow-out-of-hypothesis").output)
    assert got["in_hypothesis"] is False


def test_predict_damped_and_validation(run):
    got = json.loads(run("predict", "--d", 6, "--n", 2, "--sigma", "1/4").output)
    assert got["exponent"] == "1/2" and got["has_log"] is True
    assert run("predict", "--d", 6, "--n", 2, "--sigma", "-1/2").exit_code == 2
    assert run("predict", "--d", 6, "--n", 2).exit_code == 2
    assert run("predict", "--d", 6, "--n", 2, "--p", "abc").exit_code == 2


# --- estimate and fit ----------------------------------------------------------------


def test_estimate_writes_csv(run, tmp_path):
    res = run("--out-dir", tmp_path, "estimate", DATA / "flagship.phase",
              "--lambda-min", 4, "--lambda-max", 7, "-o", "s.csv")
    assert res.exit_code == 0
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == ",".join(CSV_HEADER) and len(lines) == 5
    norms = [float(line.split(",")[1]) for line in lines[1:]]
    assert all(b < a for a, b in zip(norms, norms[1:]))
    again = run("estimate", DATA / "flagship.phase", "--lambda-min", 4, "--lambda-max", 7)
    assert again.output.replace("\r", "") == (tmp_path / "s.csv").read_text()


def test_estimate_unresolved_row(run):
    res = CliRunner().invoke(cli, ["estimate", str(DATA / "flagship.phase"), "--ladder", "16,32,64",
                                   "--max-nodes", "300"])
    assert res.exit_code == 0
    assert "warning" in res.output and "64.0," in res.output and res.output.rstrip().endswith("false")


def test_estimate_missing_file(run, tmp_path):
    assert run("estimate", tmp_path / "none.phase").exit_code == 1


def test_fit_synthetic(run, tmp_path):
    data = [DecaySample(v, 2.0 * v ** (-1 / 3), "synthetic", 128, True) for v in octave_ladder(4, 10)]
    write_csv(tmp_path / "s.csv", data)
    res = run("--out-dir", tmp_path, "fit", tmp_path / "s.csv", "--d", 6, "--n", 2, "--p", 2,
              "--plot", "fit.svg")
    got = json.loads(res.output)
    assert got["verdict"] == "pass" and got["deviation"] < 1e-9
    svg = (tmp_path / "fit.svg").read_bytes()
    run("--out-dir", tmp_path, "fit", tmp_path / "s.csv", "--d", 6, "--n", 2, "--p", 2, "--plot", "fit.svg")
    assert (tmp_path / "fit.svg").read_bytes() == svg


def test_fit_endpoint_uses_log_model(run, tmp_path):
    data = [DecaySample(v, v ** (-1 / 3) * math.log(v) ** (2 / 3), "synthetic", 128, True)
            for v in octave_ladder(4, 10)]
    write_csv(tmp_path / "s.csv", data)
    got = json.loads(run("fit", tmp_path / "s.csv", "--d", 6, "--n", 2, "--p", 3).output)
    assert got["used_log_model"] is True and got["verdict"] == "pass"
    assert got["deviation"] < 1e-9 < abs(got["slope"] + 1 / 3)


def test_fit_insufficient_and_invalid(run, tmp_path):
    write_csv(tmp_path / "s.csv", [DecaySample(v, 1 / v, "synthetic", 8, True) for v in (16.0, 32.0, 64.0)])
    assert run("fit", tmp_path / "s.csv", "--d", 6, "--n", 2, "--p", 2).exit_code == 3
    (tmp_path / "bad.csv").write_text("a,b\n")
    assert run("fit", tmp_path / "bad.csv", "--d", 6, "--n", 2, "--p", 2).exit_code == 2
    assert run("fit", tmp_path / "none.csv", "--d", 6, "--n", 2, "--p", 2).exit_code == 1


def test_report_pipeline(run, tmp_path):
    res = run("--out-dir", tmp_path, "report", DATA / "flagship.phase", "--sigma", 0,
              "--lambda-min", 4, "--lambda-max", 7)
    assert res.exit_code == 0
    for name in ("analysis.json", "prediction.json", "samples.csv", "fit.json", "fit.svg", "report.md"):
        assert (tmp_path / name).exists()
    assert "Fitted slope" in (tmp_path / "report.md").read_text()
