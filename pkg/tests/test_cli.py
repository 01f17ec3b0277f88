import json
import shutil
from pathlib import Path

import pytest

from dispersim.cli import main

FIXTURES = Path(__file__).parent / "fixtures"
GOOD = {"graph": {"kind": "path", "n": 3, "capacities": [1, 1, 1]}, "k": 3, "protocol": "n2"}


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj) if not isinstance(obj, str) else obj)
    return str(p)


def test_run_pass(tmp_path, capsys):
    code = main(["run", "--scenario", write(tmp_path, "s.json", GOOD), "--out-dir", str(tmp_path)])
    assert code == 0
    verdict = json.loads((tmp_path / "verdict.json").read_text())
    assert verdict["ok"] and (tmp_path / "trace.jsonl").exists()


def test_run_invalid(tmp_path):
    bad = dict(GOOD, protocol="b2")
    assert main(["run", "--scenario", write(tmp_path, "s.json", bad), "--out-dir", str(tmp_path)]) == 2
    assert main(["run", "--scenario", write(tmp_path, "t.json", "{nope"), "--out-dir", str(tmp_path)]) == 2
    assert main(["run", "--scenario", str(tmp_path / "missing.json")]) == 2


def test_run_failing_fixture(tmp_path, capsys):
    code = main(["run", "--scenario", str(FIXTURES / "b3_precondition.json"), "--out-dir", str(tmp_path)])
    assert code == 1
    assert json.loads((tmp_path / "verdict.json").read_text())["precondition_unmet"] is True
    assert "warning" in capsys.readouterr().err


def test_replay_round_trip(tmp_path, capsys):
    main(["run", "--scenario", write(tmp_path, "s.json", GOOD), "--out-dir", str(tmp_path)])
    assert main(["replay", "--trace", str(tmp_path / "trace.jsonl")]) == 0
    lines = (tmp_path / "trace.jsonl").read_text().splitlines()
    lines[1] = lines[1].replace('"t":0', '"t":1')
    (tmp_path / "bad.jsonl").write_text("\n".join(lines) + "\n")
    capsys.readouterr()
    assert main(["replay", "--trace", str(tmp_path / "bad.jsonl")]) == 1
    assert json.loads(capsys.readouterr().out)["divergent_round"] == 0


def test_sweep_writes_outputs(tmp_path):
    spec = {"grid": {"protocol": ["b3", "n3"], "f": [0], "seed": [0, 1], "n": [4]}}
    out = tmp_path / "out"
    assert main(["sweep", "--sweep", write(tmp_path, "g.json", spec), "--out-dir", str(out)]) == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == ["pass_rate_by_f.png", "rounds_vs_n.png", "runs.csv", "summary.csv", "summary.json"]


def test_sweep_bad_grid(tmp_path):
    assert main(["sweep", "--sweep", write(tmp_path, "g.json", {"grid": {"colour": [1]}})]) == 2


def test_verify_uxs(tmp_path, capsys):
    assert main(["verify-uxs", "--n", "1", "2", "3", "--uxs-cache", str(tmp_path)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert [r["ok"] for r in report] == [True] * 3
    assert main(["verify-uxs", "--n", "9"]) == 2


def test_verify_uxs_with_scenario(tmp_path, capsys):
    scen = {"graph": {"kind": "ring", "n": 7}, "k": 7, "protocol": "b3"}
    assert main(["verify-uxs", "--n", "--scenario", write(tmp_path, "s.json", scen)]) == 0
    (row,) = json.loads(capsys.readouterr().out)
    assert row["mode"] == "local" and row["starts"] == 14
