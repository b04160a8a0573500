import json
import subprocess
import sys

import pytest

from taprepair.bench import fixture
from taprepair.cli import main
from taprepair.rules import parse_document


@pytest.fixture
def group1(tmp_path):
    f = fixture("Group 1")
    rules = tmp_path / "g1.tap"
    scen = tmp_path / "g1.scn"
    rules.write_text(f.rules)
    scen.write_text(f.scenario)
    return rules, scen


def test_check_reports_violation(group1, capsys):
    rules, scen = group1
    assert main(["check", "--rules", str(rules), "--scenario", str(scen), "--props", "P.22"]) == 1
    out = capsys.readouterr().out
    assert "P.22: Violation patterns=V4" in out
    assert "<-- violation" in out


def test_check_passing_property(group1, capsys):
    rules, scen = group1
    assert main(["check", "--rules", str(rules), "--scenario", str(scen), "--props", "P.20"]) == 0
    assert "P.20: Pass" in capsys.readouterr().out


def test_repair_writes_patched_rules(group1, tmp_path, capsys):
    rules, scen = group1
    out = tmp_path / "report.json"
    code = main(["repair", "--rules", str(rules), "--scenario", str(scen), "--props", "P.22",
                 "--format", "json", "--out", str(out)])
    assert code == 0
    records = [json.loads(l) for l in out.read_text().splitlines()]
    assert records[0]["property"] == "P.22" and records[0]["repair"] == "fixed"
    assert records[-1]["summary"]["fixed"] == 1
    patched = parse_document((tmp_path / "report.tap").read_text())
    assert "n1" in {r.id for r in patched.rules}


def test_repair_prints_patched_rules_without_out(group1, capsys):
    rules, scen = group1
    assert main(["repair", "--rules", str(rules), "--scenario", str(scen),
                 "--props", "P.22"]) == 0
    out = capsys.readouterr().out
    assert "# patched rules" in out
    assert "RULE n1: IF presence.state = not_present THEN heater.switch = off" in out


def test_group_tags_select_properties(group1, capsys):
    rules, scen = group1
    main(["check", "--rules", str(rules), "--scenario", str(scen), "--props", "G13"])
    out = capsys.readouterr().out
    shown = {l.split(":")[0] for l in out.splitlines() if l.startswith("P.")}
    # P.21 needs ac.switch, which this rule file does not declare
    assert shown == {"P.19", "P.20", "P.22", "P.23"}


def test_property_file(group1, tmp_path, capsys):
    rules, scen = group1
    props = tmp_path / "mine.props"
    props.write_text("PROP mine STATE WHEN TRUE THEN window.switch = closed\n")
    assert main(["check", "--rules", str(rules), "--scenario", str(scen),
                 "--props", str(props)]) == 1
    assert "mine: Violation" in capsys.readouterr().out


def test_bench(capsys):
    assert main(["bench", "--format", "json"]) == 0
    lines = capsys.readouterr().out.splitlines()
    cases = [json.loads(l) for l in lines[:-1]]
    assert [c["case"] for c in cases] == ["Group 1", "Group 2", "Group 3", "Group 4",
                                          "Group 5", "N/A 1", "N/A 2"]
    assert json.loads(lines[-1])["summary"] == {"repaired": 7, "total": 7}


@pytest.mark.parametrize("args", [
    ["check", "--rules", "/nonexistent/rules.tap"],
    ["check"],
    ["check", "--rules", "RULES", "--props", "P.999"],
    ["check", "--rules", "RULES", "--props", "P.1"],
    ["check", "--rules", "RULES", "--iter-limit", "0"],
    ["check", "--rules", "RULES", "--tick", "-5"],
])
def test_input_errors_exit_2(group1, args, capsys):
    rules, _ = group1
    args = [str(rules) if a == "RULES" else a for a in args]
    assert main(args) == 2
    assert capsys.readouterr().err.startswith("error:")


def test_syntax_error_names_the_line(tmp_path, capsys):
    bad = tmp_path / "bad.tap"
    bad.write_text("ATTR heater.switch {on, off}\nRULE a: IF heater.switch = warm THEN heater.switch = on\n")
    assert main(["check", "--rules", str(bad)]) == 2
    assert f"{bad}:2:" in capsys.readouterr().err


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "taprepair", "--help"], capture_output=True,
                         text=True)
    assert res.returncode == 0
    assert "check" in res.stdout and "repair" in res.stdout and "bench" in res.stdout
