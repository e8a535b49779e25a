import csv
import io
import json

import numpy as np
import pytest

from impiqc import analysis as an
from impiqc import cli, sysio
from impiqc.dwell import DwellSpec
from impiqc.systems import hold_loop


def run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_analyze_matches_library(capsys):
    code, out, err = run(["gain", "--system", "hold_loop.json", "--test", "clock",
                          "--rdt", "1", "2"], capsys)
    assert code == cli.EXIT_OK
    row = next(csv.DictReader(io.StringIO(out)))
    gamma, _ = an.min_gain("clock", hold_loop(), DwellSpec.rdt(1, 2))
    assert float(row["gamma"]) == pytest.approx(gamma, rel=1e-5)
    assert json.loads(err)["status"] == "feasible"


def test_infeasible_exit_code(capsys):
    code, out, _ = run(["analyze", "--system", "exa1.json", "--beta", "1.0", "--test", "clock",
                        "--rdt", "6", "9"], capsys)
    assert code == cli.EXIT_INFEASIBLE
    assert "infeasible" in out


@pytest.mark.parametrize("argv", [
    ["analyze", "--system", "exa1.json", "--test", "clock", "--L", "3", "--rdt", "2", "3"],
    ["analyze", "--system", "exa1.json", "--test", "clock", "--nu", "2", "--rdt", "2", "3"],
    ["analyze", "--system", "exa1.json", "--test", "clock"],
    ["analyze", "--test", "clock", "--rdt", "2", "3"],
    ["analyze", "--system", "hold_loop.json", "--test", "clock", "--mode", "performance",
     "--rdt", "1", "2"],
    ["analyze", "--system", "missing.json", "--test", "clock", "--rdt", "2", "3"],
    ["analyze", "--system", "exa1.json", "--test", "clock", "--rdt", "3", "2"],
    ["synthesize", "--system", "exa_syn.json", "--route", "slack", "--nu", "2", "--rdt", "4", "5"],
    ["synthesize", "--system", "exa1.json", "--rdt", "4", "5"],
    ["frobnicate"],
])
def test_usage_errors(argv, capsys):
    assert run(argv, capsys)[0] == cli.EXIT_ERROR


def test_malformed_json(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text("[1, 2")
    code, _, err = run(["analyze", "--system", str(p), "--test", "clock", "--rdt", "2", "3"], capsys)
    assert code == cli.EXIT_ERROR and "invalid JSON" in err


def test_synthesize_then_simulate(tmp_path, capsys):
    est = tmp_path / "est.json"
    code, _, err = run(["synthesize", "--system", "exa_syn.json", "--route", "slack", "--rdt", "4", "5",
                        "-o", str(est)], capsys)
    assert code == cli.EXIT_OK
    assert json.loads(err)["gamma"] > 0
    assert sysio.load(str(est)).order == 2
    code, out, _ = run(["simulate", "--system", "exa_syn.json", "--estimator", str(est),
                        "--rdt", "4", "5", "--horizon", "50", "--disturbance", "d2"], capsys)
    assert code == cli.EXIT_OK
    rows = list(csv.reader(io.StringIO(out)))
    assert len(rows) == 52 and rows[0][0] == "t"


def test_simulate_is_seeded(capsys):
    argv = ["simulate", "--system", "hold_loop.json", "--rdt", "1", "3", "--disturbance", "white",
            "--seed", "3", "--horizon", "40"]
    a = run(argv, capsys)[1]
    b = run(argv, capsys)[1]
    assert a == b
    x = np.array([r[1] for r in csv.reader(io.StringIO(a))][1:], dtype=float)
    assert np.abs(x).max() > 0


def test_reproduce_rejects_unknown_target(capsys):
    assert run(["reproduce", "nope"], capsys)[0] == cli.EXIT_ERROR
