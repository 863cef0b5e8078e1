import json

import pytest

from reggames.cli import main

DEGEN = {"players": 2, "actions": [2, 2], "payoffs": [0, 0, 1, -1], "shared": True}


@pytest.fixture
def files(tmp_path):
    g = tmp_path / "g.json"
    g.write_text(json.dumps(DEGEN))
    p = tmp_path / "p.json"
    p.write_text(json.dumps({"simplex": [[1, 0], [0.5, 0.5]]}))
    q = tmp_path / "q.json"
    q.write_text(json.dumps({"simplex": [[0, 1], [1, 0]]}))
    return tmp_path


def test_analyze(files, capsys):
    assert main(["analyze", str(files / "g.json")]) == 0
    assert json.loads(capsys.readouterr().out)["kind"] == "identical"


def test_enumerate(files, capsys):
    assert main(["enumerate", str(files / "g.json")]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["count"] == 3
    assert sorted(e["isolated"] for e in out["equilibria"]) == [False, False, True]


def test_certify_exit_codes(files, capsys):
    assert main(["certify", str(files / "g.json"), "--profile", str(files / "p.json")]) == 1
    assert json.loads(capsys.readouterr().out)["verdict"] == "first_order_degenerate"
    assert main(["certify", str(files / "g.json"), "--profile", str(files / "q.json")]) == 0


def test_lmatrix_check(tmp_path, capsys):
    f = tmp_path / "l.json"
    f.write_text("[[1, 1], [1, 1]]")
    assert main(["lmatrix-check", str(f)]) == 1
    assert json.loads(capsys.readouterr().out)["witness_diagonal"] == [1, -1]
    f.write_text("[[1, 0], [0, -1]]")
    assert main(["lmatrix-check", str(f)]) == 0


def test_experiment(tmp_path, capsys):
    out = tmp_path / "run"
    code = main(["experiment", "oddness", "--size", "2x2", "--samples", "20", "--seed", "42", "--out", str(out), "--workers", "1"])
    assert code == 0
    assert json.loads((tmp_path / "run.json").read_text())["aggregates"]["odd_rate"] == 1.0


def test_usage_errors(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["experiment", "bogus"])
    assert exc.value.code == 2
    assert main(["enumerate", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["analyze", str(bad)]) == 2
    assert main(["experiment", "oddness", "--size", "2x9", "--workers", "1"]) == 2
