import json

import pytest
import yaml

from mcm_sim import COMMAND_CLASS_MAPPINGS, COMMAND_DISPLAY_NAME_MAPPINGS, __version__
from mcm_sim.artifacts import ERROR_REPORT, MANIFEST
from mcm_sim.cli import build_parser, main
from mcm_sim.config import load_config


def _load(path):
    return json.loads(path.read_text(encoding="utf-8"))


def test_command_classes_are_complete():
    expected = {"mcm run", "budget optimize", "budget shiftout", "budget photons", "spam correct",
                "config show", "config schema", "reproduce-paper"}
    assert expected <= set(COMMAND_CLASS_MAPPINGS)
    for name, cls in COMMAND_CLASS_MAPPINGS.items():
        assert cls.COMMAND == name
        assert name in COMMAND_DISPLAY_NAME_MAPPINGS
        assert "report" in cls.RETURN_NAMES
        assert callable(getattr(cls, cls.FUNCTION))
        assert cls.CATEGORY.startswith("MCM/")
        inputs = cls.INPUT_TYPES()
        assert set(inputs) <= {"required", "optional"}


def test_parser_nests_grouped_commands():
    args = build_parser().parse_args(["budget", "optimize", "--out", "x"])
    assert args.command == "budget optimize"
    args = build_parser().parse_args(["reproduce-paper", "--fast"])
    assert args.command == "reproduce-paper"
    assert args.fast is True


def test_version(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_budget_optimize(tmp_path, capsys):
    out = tmp_path / "optimize"
    assert main(["budget", "optimize", "--out", str(out), "-q"]) == 0
    report = _load(out / "report.json")
    assert report["optimum"]["7p"]["p_min"] == pytest.approx(0.0029, rel=0.03)
    assert json.loads(capsys.readouterr().out) == report
    listed = [a["path"] for a in _load(out / MANIFEST)["artifacts"]]
    assert listed == ["optimum.csv", "report.json"]


def test_spam_correct(tmp_path):
    out = tmp_path / "spam"
    assert main(["spam", "correct", "--out", str(out), "-q"]) == 0
    ancilla = _load(out / "report.json")["ancilla"]
    assert ancilla["P_D_given_0"]["value"] == pytest.approx(0.949, abs=0.001)
    assert ancilla["P_B_given_1"]["value"] == pytest.approx(0.953, abs=0.001)
    assert (out / "table.csv").read_text().startswith("input,raw,")
    assert not (out / ERROR_REPORT).exists()
    assert _load(out / "report.json")["propagation"] == {"average": "correlated", "ancilla": "joint"}


def test_spam_correct_alternative_propagation(tmp_path):
    out = tmp_path / "spam"
    assert main(["spam", "correct", "--independent", "--propagation", "staged", "--out", str(out), "-q"]) == 0
    report = _load(out / "report.json")
    assert report["propagation"] == {"average": "independent", "ancilla": "staged"}
    assert report["ancilla"]["P_B_given_1"]["sigma"] == pytest.approx(0.011, abs=0.003)


def test_invalid_shots_exit_2(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["mcm", "run", "--shots", "0", "--out", str(out), "-q"]) == 2
    error = _load(out / ERROR_REPORT)
    assert error["error"] == "config"
    assert error["exit_code"] == 2
    assert error["command"] == "mcm run"
    assert "--shots" in error["message"]
    assert not (out / MANIFEST).exists()
    assert json.loads(capsys.readouterr().out) == error


@pytest.mark.parametrize("argv", [
    ["budget", "shiftout", "--lifetime", "165"],
    ["budget", "shiftout", "--lifetime", "165 MHz"],
    ["budget", "shiftout", "--epsilon", "1.5"],
    ["budget", "photons", "--duration", "4 ms", "--target", "50"],
    ["spam", "correct", "--propagation", "sideways"],
    ["mcm", "run", "--shots", "many"],
    ["reproduce-paper", "--only", "nonsense"],
])
def test_bad_flags_exit_2(tmp_path, argv):
    out = tmp_path / "bad"
    assert main(argv + ["--out", str(out), "-q"]) == 2
    error = _load(out / ERROR_REPORT)
    assert error["exit_code"] == 2
    assert error["diagnostics"]


def test_quantity_flag_diagnostics(tmp_path):
    out = tmp_path / "bad"
    main(["budget", "shiftout", "--lifetime", "165", "--out", str(out), "-q"])
    diagnostics = _load(out / ERROR_REPORT)["diagnostics"]
    assert diagnostics[0]["path"] == "--lifetime"


def test_missing_config_file(tmp_path):
    out = tmp_path / "cfg"
    code = main(["budget", "optimize", "--config", str(tmp_path / "absent.yaml"), "--out", str(out), "-q"])
    assert code == 2
    assert "does not exist" in _load(out / ERROR_REPORT)["message"]


def test_config_show_prints_yaml(tmp_path, capsys, config):
    out = tmp_path / "show"
    assert main(["config", "show", "--out", str(out), "-q"]) == 0
    printed = capsys.readouterr().out
    document = yaml.safe_load(printed)
    assert list(document) == list(config.to_document())
    assert document["physics"] == config.to_document()["physics"]
    assert (out / "config.yaml").read_text(encoding="utf-8") == printed


def test_config_show_saves_loadable_copy(tmp_path, config):
    target = tmp_path / "saved" / "run.yaml"
    assert main(["config", "show", "--save", str(target), "--out", str(tmp_path / "show"), "-q"]) == 0
    assert load_config(str(target)) == config
    assert _load(tmp_path / "show" / "report.json")["saved"] == str(target)


def test_reproduce_spam_only(tmp_path):
    out = tmp_path / "repro"
    assert main(["reproduce-paper", "--only", "spam", "--out", str(out), "-q"]) == 0
    report = _load(out / "report.json")
    assert len(report["criteria"]) == 10
    statuses = {row["id"]: row["status"] for row in report["criteria"]}
    assert statuses[1] == statuses[2] == "pass"
    assert all(statuses[i] == "skipped" for i in range(3, 11))
    assert report["summary"]["skipped"] == 8
    header = (out / "summary.csv").read_text().splitlines()[0]
    assert header == "id,module,criterion,check,measured,target,tolerance,status"


def test_reproduce_is_deterministic(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    for out in (first, second):
        assert main(["reproduce-paper", "--only", "spam,3", "--out", str(out), "-q"]) == 0
    for name in ("report.json", "summary.csv"):
        assert (first / name).read_bytes() == (second / name).read_bytes()
