import csv
import io
import json
import subprocess
import sys
from importlib import resources

import pytest

from plantedmatch.cli import build_parser, main
from plantedmatch.experiments import records_from_csv
from plantedmatch.model import load_instance

SUBCOMMANDS = ["gen", "solve", "theory", "augmenting", "combinat", "track", "sweep", "verify"]


def _run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def _recipe(name):
    return str(resources.files("plantedmatch") / "recipes" / name)


@pytest.mark.parametrize("sub", SUBCOMMANDS)
def test_help_for_every_subcommand(capsys, sub):
    code, out, _ = _run(capsys, sub, "--help")
    assert code == 0 and "--seed" in out and "--format" in out
    parser = build_parser()
    sp = parser._subparsers._group_actions[0].choices[sub]
    for action in sp._actions:
        assert action.help, f"{sub} {action.option_strings} has no help"


def test_theory_json(capsys):
    code, out, _ = _run(capsys, "theory", "--n", "1000", "--d", "28", "--sigma2", "0.3", "--tmax", "50")
    assert code == 0
    doc = json.loads(out)
    assert doc["n"] == 1000 and len(doc["S_table"]) >= 49
    th = doc["thresholds"]
    assert th["perfect"] <= th["strong_conjectured"] <= th["greedy_third"]


def test_theory_csv(capsys):
    code, out, _ = _run(capsys, "theory", "--n", "100", "--d", "3", "--sigma2", "0.1", "--format", "csv")
    assert code == 0 and out.splitlines()[0] == "t,S,c"


def test_verify_passes(capsys):
    code, out, err = _run(capsys, "verify")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines and all(line.startswith("PASS ") for line in lines)
    assert "recurrence" in err


def test_usage_errors_exit_1(capsys):
    assert _run(capsys, "theory", "--n", "10", "--d", "2", "--sigma2", "0.1", "--bogus")[0] == 1
    assert _run(capsys, "nonsense")[0] == 1
    assert _run(capsys, "gen", "--n", "0", "--d", "2", "--sigma2", "0.1")[0] == 1
    code, _, err = _run(capsys, "solve")
    assert code == 1 and "exactly one" in err


def test_runtime_errors_exit_2(capsys, tmp_path):
    code, _, err = _run(capsys, "solve", "--instance", str(tmp_path / "missing.json"))
    assert code == 2 and "FileNotFoundError" in err
    assert _run(capsys, "track", "--delta", "-1", "--K", "3")[0] == 2


def test_gen_solve_round_trip(capsys, tmp_path):
    path = tmp_path / "inst.json"
    assert _run(capsys, "gen", "--n", "30", "--d", "2", "--sigma2", "0.01", "--seed", "4", "--out", str(path))[0] == 0
    inst = load_instance(path)
    assert inst.n == 30 and inst.seed == 4
    code, out, _ = _run(capsys, "solve", "--instance", str(path))
    doc = json.loads(out)
    assert code == 0 and sorted(doc["permutation"]) == list(range(30))
    assert doc["error_count"] >= 0


def test_solve_matrix(capsys, tmp_path):
    path = tmp_path / "c.csv"
    path.write_text("4,1,3\n2,0,5\n3,2,2\n")
    code, out, _ = _run(capsys, "solve", "--matrix", str(path))
    assert code == 0 and json.loads(out)["objective"] == 5
    code, out, _ = _run(capsys, "solve", "--matrix", str(path), "--format", "csv")
    assert out.splitlines()[0] == "row,column"
    path.write_text("1,2\n")
    assert _run(capsys, "solve", "--matrix", str(path))[0] == 1


def test_gen_csv(capsys):
    code, out, _ = _run(capsys, "gen", "--n", "3", "--d", "2", "--sigma2", "0.0", "--format", "csv")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 6 and set(rows[0]) == {"role", "index", "c0", "c1"}


def test_sweep_deterministic(capsys, tmp_path):
    args = ["sweep", "--config", _recipe("fig5_error_rate.json"), "--n", "50", "--trials", "2"]
    code, first, _ = _run(capsys, *args)
    assert code == 0
    assert _run(capsys, *args)[1] == first
    recs = records_from_csv(first)
    assert {r.n for r in recs} == {50} and {r.trial for r in recs} == {0, 1}
    summary = tmp_path / "summary.json"
    _run(capsys, *args, "--summary", str(summary))
    assert json.loads(summary.read_text())[0]["n"] == 50
    code, out, _ = _run(capsys, *args, "--format", "json")
    assert code == 0 and isinstance(json.loads(out), list)


def test_combinat_tables(capsys):
    code, out, _ = _run(capsys, "combinat", "--table", "matchings", "--t", "4", "--format", "csv")
    assert code == 0 and out.splitlines() == ["t,k,count", "4,0,1", "4,1,4", "4,2,2"]
    code, out, _ = _run(capsys, "combinat", "--table", "cycles", "--t", "8", "--format", "json")
    assert code == 0 and sum(r["probability"] for r in json.loads(out)) == pytest.approx(1.0)
    code, out, _ = _run(capsys, "combinat", "--table", "forests", "--t", "5")
    assert all(r["E_k"] == r["M_2t_k"] for r in json.loads(out) if r["k"] < 5)
    assert _run(capsys, "combinat", "--table", "cycles", "--t", "7")[0] == 2


def test_track_outputs(capsys):
    code, out, _ = _run(capsys, "track", "--n", "6", "--d", "1", "--delta", "0.01", "--K", "5", "--format", "csv")
    assert code == 0 and out.splitlines()[0] == "step,time,fixed_points,step_errors" and len(out.splitlines()) == 7
    code, out, _ = _run(capsys, "track", "--n", "2", "--d", "1", "--delta", "0.1", "--K", "100000", "--tmax",
                        "--trials", "10")
    doc = json.loads(out)
    assert code == 0 and doc["censored_fraction"] == 0 and len(doc["times"]) == 10


def test_augmenting_outputs(capsys):
    code, out, _ = _run(capsys, "augmenting", "--n", "40", "--d", "2", "--sigma2", "0.05", "--seed", "3")
    doc = json.loads(out)
    assert code == 0 and doc["M"] <= doc["error_count"]
    code, out, _ = _run(capsys, "augmenting", "--d", "2", "--sigma2", "0.1", "--phat", "--trials", "20000")
    assert code == 0 and 0 < json.loads(out)["p"] < 1


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "plantedmatch.cli", "theory", "--n", "50", "--d", "2", "--sigma2",
                          "0.1", "--tmax", "5"], capture_output=True, text=True, check=False)
    assert res.returncode == 0 and json.loads(res.stdout)["d"] == 2
