import csv
import io
import json

import pytest

from lossless_release import cli
from lossless_release.suite import CheckResult


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_release_roundtrip(tmp_path, capsys):
    led = str(tmp_path / "l.json")
    code, out, _ = run(["release", "--ledger", led, "--init", "--value", "1,2,3", "--trusted", "--rho", "1", "--seed", "1"], capsys)
    assert code == 0
    first = json.loads(out)
    assert first["rho"] == 1.0 and len(first["value"]) == 3
    code, out, _ = run(["release", "--ledger", led, "--rho", "1.5", "--seed", "2"], capsys)
    assert code == 0 and json.loads(out)["rho"] == 1.5
    code, out, _ = run(["release", "--ledger", led, "--rho", "1"], capsys)
    assert json.loads(out)["value"] == first["value"]
    doc = json.loads(open(led).read())
    assert [e["rho"] for e in doc["entries"]] == [1.0, 1.5]
    assert "secret" in doc


def test_release_csv_format(tmp_path, capsys):
    led = str(tmp_path / "l.json")
    code, out, _ = run(
        ["release", "--ledger", led, "--init", "--value", "4", "--mechanism", "laplace", "--rho-inf", "5", "--rho", "2", "--format", "csv", "--seed", "3"],
        capsys,
    )
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["index", "value"] and len(rows) == 2
    assert "secret" not in json.loads(open(led).read())


def test_usage_errors_exit_2(tmp_path, capsys):
    led = str(tmp_path / "l.json")
    assert run(["release", "--ledger", led, "--init", "--value", "1", "--rho", "1"], capsys)[0] == 2
    run(["release", "--ledger", led, "--init", "--value", "1", "--mechanism", "laplace", "--rho-inf", "2", "--seed", "1"], capsys)
    assert run(["release", "--ledger", led, "--rho", "3"], capsys)[0] == 2
    assert run(["release", "--ledger", str(tmp_path / "missing.json"), "--rho", "1"], capsys)[0] == 2
    with pytest.raises(SystemExit) as exc:
        cli.main(["bogus"])
    assert exc.value.code == 2


def test_seed_env_fallback(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv(cli.SEED_ENV, "42")
    outs = []
    for name in ("a.json", "b.json"):
        led = str(tmp_path / name)
        outs.append(run(["release", "--ledger", led, "--init", "--value", "0,0", "--trusted", "--rho", "1"], capsys)[1])
    assert outs[0] == outs[1]
    monkeypatch.setenv(cli.SEED_ENV, "nope")
    assert run(["release", "--ledger", str(tmp_path / "c.json"), "--init", "--value", "0", "--trusted", "--rho", "1"], capsys)[0] == 2


def test_histogram_command(tmp_path, capsys):
    path = tmp_path / "h.json"
    path.write_text(json.dumps({"d": 100, "counts": {"3": 5, "17": 3, "42": 2, "60": 1, "99": 8}}))
    code, out, _ = run(
        ["histogram", "--input", str(path), "--budgets", "0.3,1,3", "--thresholds", "3,2,1.5", "--seed", "4"], capsys
    )
    assert code == 0
    doc = json.loads(out)
    assert [r["round"] for r in doc["rounds"]] == [1, 2, 3]
    man = doc["manifest"]
    assert man["seed"] == 4 and man["k"] == 5
    assert man["gaussian_draws"] == (5 + man["activated_zero_counts"]) * 3


def test_histogram_csv_input(tmp_path, capsys):
    path = tmp_path / "h.csv"
    path.write_text("index,count\nd,20\n2,7\n5,1\n")
    code, out, _ = run(
        ["histogram", "--input", str(path), "--budgets", "1,2", "--thresholds", "0.5", "--algorithm", "naive", "--format", "csv", "--seed", "1"],
        capsys,
    )
    assert code == 0
    assert out.splitlines()[0] == "round,index,value"


def test_fact_release_command(tmp_path, capsys):
    m = tmp_path / "m.json"
    m.write_text(json.dumps({"L": [[1, 0], [1, 1]], "R": [[1, 0], [0, 1]]}))
    led = str(tmp_path / "f.json")
    code, out, _ = run(
        ["fact-release", "--ledger", led, "--init", "--matrices", str(m), "--x", "3,4", "--trusted", "--rho", "2", "--seed", "1"],
        capsys,
    )
    assert code == 0 and len(json.loads(out)["value"]) == 2
    code, out, _ = run(["fact-release", "--ledger", led, "--rho", "0.5", "--seed", "2"], capsys)
    assert code == 0
    doc = json.loads(open(led).read())
    assert doc["L"] == [[1, 0], [1, 1]] and len(doc["entries"]) == 2


def test_fact_release_csv_matrices(tmp_path, capsys):
    (tmp_path / "L.csv").write_text("1,0\n1,1\n1,1\n")
    (tmp_path / "R.csv").write_text("1,0\n0,1\n")
    led = str(tmp_path / "f.json")
    code, out, _ = run(
        ["fact-release", "--ledger", led, "--init", "--L", str(tmp_path / "L.csv"), "--R", str(tmp_path / "R.csv"),
         "--x", "1,1", "--rho-inf", "4", "--rho", "1", "--seed", "5"],
        capsys,
    )
    assert code == 0 and len(json.loads(out)["value"]) == 3


def test_account_command(capsys):
    code, out, _ = run(["account", "compose", "1", "2"], capsys)
    assert json.loads(out)["rho"] == 3
    code, out, _ = run(["account", "max", "0.5", "2", "1", "--format", "csv"], capsys)
    assert out.splitlines()[1] == "max,2.0"
    code, out, _ = run(["account", "poisson-unit", "--lam", "1000", "--delta", "1e-6"], capsys)
    assert json.loads(out)["epsilon"] == pytest.approx(0.70949, abs=1e-5)
    assert run(["account", "poisson-unit", "--lam", "100"], capsys)[0] == 2


def test_fig2_rows_and_determinism(tmp_path, capsys):
    args = ["fig2", "--reps", "300", "--grid-log", "0.001:5:20", "--seed", "7"]
    code, out, _ = run(args, capsys)
    assert code == 0
    assert len(out.strip().splitlines()) == 41
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run(args + ["--out", str(a)], capsys)
    run(args + ["--out", str(b)], capsys)
    assert a.read_bytes() == b.read_bytes() == out.encode()


def test_suite_exit_codes(monkeypatch, capsys):
    monkeypatch.setattr(cli, "run_suite", lambda **kw: [CheckResult("x", False, "forced")])
    assert run(["suite", "--quick"], capsys)[0] == 1
    monkeypatch.setattr(cli, "run_suite", lambda **kw: [CheckResult("x", True, "ok")])
    assert run(["suite", "--quick"], capsys)[0] == 0


@pytest.mark.slow
def test_quick_suite_passes(capsys):
    code, out, _ = run(["suite", "--quick"], capsys)
    assert code == 0, out
