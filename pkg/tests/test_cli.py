from __future__ import annotations

import json
import subprocess
import sys
from fractions import Fraction

import pytest

from dpa.cli import main

from generators import MODELS


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def model(k):
    return MODELS / f"m{k}.json"


def test_analyze_m2(capsys):
    code, out, _ = run(capsys, "analyze", model(2))
    assert code == 0
    doc = json.loads(out)
    assert [h["probability"]["exact"] for h in doc["histories"]] == ["7/8", "1/8"]
    assert doc["discarded_mass"]["exact"] == "0"
    assert doc["stats"]["nodes"] >= 4


def test_analyze_makespan_and_precedes(capsys):
    code, out, _ = run(capsys, "analyze", model(1), "--query", "makespan", "--cdf-grid", "5")
    doc = json.loads(out)
    ms = doc["queries"]["makespan"]
    assert ms["expectation"]["exact"] == "3/2" and ms["support"] == ["1", "2"]
    assert ms["cdf"][0] == [1.0, 0.0] and ms["cdf"][-1] == [2.0, 1.0] and len(ms["cdf"]) == 5
    code, out, _ = run(capsys, "analyze", model(2), "--query", "precedes:P1.e1,P2.e1")
    assert json.loads(out)["queries"]["precedes"][0]["probability"]["exact"] == "7/8"


def test_makespan_query_enables_time_clock(tmp_path, capsys):
    doc = json.loads(model(5).read_text())
    doc["options"]["absolute_time_clock"] = False
    path = tmp_path / "m5.json"
    path.write_text(json.dumps(doc))
    code, out, _ = run(capsys, "analyze", path, "--query", "makespan")
    assert code == 0
    assert json.loads(out)["queries"]["makespan"]["expectation"]["exact"] == "2/3"


def test_analyze_prune(capsys):
    code, out, _ = run(capsys, "analyze", model(2), "--prune-eps", "0.25")
    doc = json.loads(out)
    assert doc["discarded_mass"]["exact"] == "1/8"
    assert [h["probability"]["exact"] for h in doc["histories"]] == ["7/8"]


def test_rationals_round_trip(capsys):
    _, out, _ = run(capsys, "analyze", model(2), "--query", "makespan")
    doc = json.loads(out)
    found = []

    def walk(node):
        if isinstance(node, dict):
            if set(node) == {"exact", "float"}:
                found.append(node)
            for v in node.values():
                walk(v)
        elif isinstance(node, list):
            for v in node:
                walk(v)

    walk(doc)
    assert found
    for r in found:
        q = Fraction(r["exact"])
        assert str(q) == r["exact"] and float(q) == r["float"]


def test_simulate_m4_and_env(capsys, monkeypatch):
    code, out, _ = run(capsys, "simulate", model(4), "--samples", "2000", "--seed", "9")
    doc = json.loads(out)
    assert code == 0 and len(doc["histories"]) == 1 and doc["histories"][0]["p"] == 1.0
    monkeypatch.setenv("DPA_SEED", "9")
    monkeypatch.setenv("DPA_SAMPLES", "2000")
    _, env_out, _ = run(capsys, "simulate", model(4))
    assert env_out == out
    _, flag_out, _ = run(capsys, "simulate", model(4), "--seed", "10")
    assert json.loads(flag_out)["seed"] == 10


def test_compare(capsys):
    code, out, _ = run(capsys, "compare", model(4), "--samples", "5000", "--seed", "1")
    doc = json.loads(out)
    assert code == 0 and doc["verdict"] == "pass"
    assert doc["histories"][0]["z"] == 0.0 and doc["histories"][0]["estimate"] == 1.0
    code, out, _ = run(capsys, "compare", model(2), "--samples", "200000", "--seed", "1")
    assert code == 0


def test_compare_detects_corruption(capsys):
    code, out, _ = run(capsys, "compare", model(2), "--samples", "200000", "--seed", "1",
                       "--inject-bias", "1/50")
    assert code == 3 and json.loads(out)["verdict"] == "fail"


@pytest.mark.parametrize("text,code", [
    ('{"processes": [', 1),
    ('{"processes": [{"name": "A", "steps": [{"lo": 1, "hi": 1}]}]}', 1),
    ('{"processes": [{"name": "A", "steps": [{"lo": 0, "hi": 1, "resources": {"m": 1}}]},'
     '{"name": "B", "steps": [{"lo": 0, "hi": 1, "resources": {"m": 1}}]}],'
     '"resources": [{"name": "m", "capacity": 1}]}', 2),
])
def test_exit_codes(tmp_path, capsys, text, code):
    path = tmp_path / "bad.json"
    path.write_text(text)
    got, out, err = run(capsys, "analyze", path)
    assert got == code and out == "" and err.startswith("dpa:")


def test_usage_errors(capsys):
    assert run(capsys, "analyze", model(2), "--query", "bogus")[0] == 1
    assert run(capsys, "analyze", model(2), "--query", "precedes:P1.e1,P7.e1")[0] == 1
    assert run(capsys, "analyze", "/nonexistent.json")[0] == 1
    with pytest.raises(SystemExit) as info:
        main(["analyze"])
    assert info.value.code == 1


def test_out_file(tmp_path, capsys):
    path = tmp_path / "r.json"
    code, out, _ = run(capsys, "analyze", model(3), "--out", path)
    assert code == 0 and out == ""
    assert json.loads(path.read_text())["kind"] == "analysis"


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "dpa", "analyze", str(model(1))],
                         capture_output=True, text=True, check=True)
    assert json.loads(res.stdout)["histories"][0]["probability"]["exact"] == "1"
