import json
import math

import numpy as np

from mcm_sim.artifacts import ERROR_REPORT, MANIFEST, RunDirectory, sha256, to_csv, to_json


def test_json_is_canonical_and_finite_safe():
    text = to_json({"b": np.float64(1 / 3), "a": [np.int64(2), math.inf], "c": 1 + 2j})
    data = json.loads(text)
    assert list(data) == ["a", "b", "c"]
    assert data["b"] == 0.3333333333
    assert data["a"] == [2, "inf"]
    assert data["c"] == {"re": 1.0, "im": 2.0}
    assert text.endswith("\n")


def test_csv_rounds_floats():
    assert to_csv([["x", "y"], [1, 0.1 + 0.2]]) == "x,y\n1,0.3\n"


def test_manifest_lists_every_artifact(tmp_path):
    run = RunDirectory(tmp_path / "run", "budget optimize")
    run.write_json("report.json", {"p_min": 0.0029})
    run.write_csv("table.csv", [["a"], [1]])
    run.write_json("report.json", {"p_min": 0.0029})
    run.finalize()
    manifest = json.loads((tmp_path / "run" / MANIFEST).read_text())
    assert manifest["command"] == "budget optimize"
    assert [a["path"] for a in manifest["artifacts"]] == ["report.json", "table.csv"]
    entry = manifest["artifacts"][0]
    assert entry["sha256"] == sha256(tmp_path / "run" / "report.json")


def test_identical_content_gives_identical_bytes(tmp_path):
    for name in ("a", "b"):
        run = RunDirectory(tmp_path / name, "x")
        run.write_json("report.json", {"value": 0.1 + 0.2})
        run.finalize()
    assert (tmp_path / "a" / MANIFEST).read_bytes() == (tmp_path / "b" / MANIFEST).read_bytes()


def test_error_report(tmp_path):
    run = RunDirectory(tmp_path / "run")
    path = run.write_error({"error": "config", "exit_code": 2})
    assert path.name == ERROR_REPORT
    assert json.loads(path.read_text())["exit_code"] == 2
