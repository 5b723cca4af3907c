import json
import subprocess
import sys

import pytest

from bankscan.cli import (
    CliUsageError,
    ConflictingModesError,
    MissingArgumentError,
    UnknownFlagError,
    execute,
    main,
    parse_args,
)
from bankscan.fixtures import build_fixture, profile_for_rules
from bankscan.rules import RuleId, Severity


# --- parsing -----------------------------------------------------------------


def test_parse_single_scan():
    config = parse_args(["-f", "app.apk"])
    assert config.mode == "scan"
    assert [p.name for p in config.inputs] == ["app.apk"]


def test_parse_help():
    assert parse_args(["-h"]).mode == "help"
    assert parse_args(["--help", "-f", "x.apk"]).mode == "help"


def test_parse_conflicting_modes():
    with pytest.raises(ConflictingModesError):
        parse_args(["-f", "a.apk", "--dir", "d/"])
    with pytest.raises(ConflictingModesError):
        parse_args(["-f", "a.apk", "--matrix"])
    with pytest.raises(ConflictingModesError):
        parse_args(["-f", "a.apk", "b.apk"])


def test_parse_batch_and_matrix():
    config = parse_args(["--dir", "d/", "extra.apk"])
    assert config.mode == "batch"
    assert [p.name for p in config.dirs] == ["d"]
    config = parse_args(["--matrix", "a.apk", "b.apk"])
    assert config.mode == "matrix"
    assert len(config.inputs) == 2


def test_parse_errors():
    with pytest.raises(UnknownFlagError):
        parse_args(["--frobnicate"])
    with pytest.raises(MissingArgumentError):
        parse_args(["-f"])
    with pytest.raises(MissingArgumentError):
        parse_args([])
    with pytest.raises(CliUsageError):
        parse_args(["-f", "a.apk", "--fail-on", "fatal"])
    with pytest.raises(CliUsageError):
        parse_args(["-f", "a.apk", "--format", "yaml"])
    with pytest.raises(CliUsageError):
        parse_args(["--jobs", "zero", "a.apk"])


def test_parse_options():
    config = parse_args(
        ["-f", "a.apk", "-o", "out.txt", "--format", "json", "--fail-on", "warning", "--jobs", "3"]
    )
    assert config.output_path.name == "out.txt"
    assert config.fmt == "json"
    assert config.fail_threshold == Severity.WARNING
    assert config.jobs == 3


# --- execution ----------------------------------------------------------------


@pytest.fixture()
def apk_on_disk(tmp_path):
    def write(profile_name: str, rules: frozenset) -> str:
        data = build_fixture(profile_for_rules(profile_name, rules))
        path = tmp_path / f"{profile_name}.apk"
        path.write_bytes(data)
        return str(path)

    return write


def test_scan_clean_exit_zero(apk_on_disk, capsys):
    path = apk_on_disk("cleanapp", frozenset())
    assert main(["-f", path, "--fail-on", "critical"]) == 0
    out = capsys.readouterr().out
    assert "Security report: cleanapp.apk" in out
    assert "findings: 0" in out


def test_scan_critical_finding_exit_one(apk_on_disk):
    path = apk_on_disk("hasrce", frozenset({RuleId.R04}))
    assert main(["-f", path, "--fail-on", "critical"]) == 1
    assert main(["-f", path]) == 0  # no threshold set


def test_scan_missing_file_exit_three(tmp_path, capsys):
    assert main(["-f", str(tmp_path / "nope.apk")]) == 3
    assert "nope.apk" in capsys.readouterr().err


def test_scan_corrupt_file_exit_three(tmp_path, capsys):
    bad = tmp_path / "bad.apk"
    bad.write_bytes(b"this is not an apk at all")
    assert main(["-f", str(bad)]) == 3
    assert "NotAZip" in capsys.readouterr().err


def test_usage_error_exit_two(capsys):
    assert main(["--definitely-not-a-flag"]) == 2
    err = capsys.readouterr().err
    assert "usage:" in err


def test_help_exit_zero(capsys):
    assert main(["-h"]) == 0
    assert "usage:" in capsys.readouterr().out


def test_output_file_and_json_format(apk_on_disk, tmp_path):
    path = apk_on_disk("jsonout", frozenset({RuleId.R11}))
    out = tmp_path / "report.json"
    assert main(["-f", path, "--format", "json", "-o", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["kind"] == "report"
    assert [s["rule"] for s in doc["sections"]] == ["R11"]


def test_format_env_var_default(apk_on_disk, tmp_path, monkeypatch):
    path = apk_on_disk("envfmt", frozenset())
    out = tmp_path / "r.json"
    monkeypatch.setenv("BANKSCAN_FORMAT", "json")
    assert main(["-f", path, "-o", str(out)]) == 0
    assert json.loads(out.read_text())["kind"] == "report"
    monkeypatch.setenv("BANKSCAN_FORMAT", "bogus")
    assert main(["-f", path]) == 2


def test_matrix_over_fleet_dir(fleet_dir, capsys):
    assert main(["--dir", str(fleet_dir), "--matrix", "--format", "csv"]) == 0
    out = capsys.readouterr().out
    rows = {line.split(",")[0]: line for line in out.strip().splitlines()[1:]}
    expected = {
        "starling-like.apk": ("3", "21.43"),
        "monese-like.apk": ("7", "50.00"),
        "atom-like.apk": ("5", "35.71"),
        "transferwise-like.apk": ("5", "35.71"),
        "monzo-like.apk": ("5", "35.71"),
        "revolut-like.apk": ("10", "71.43"),
    }
    assert set(rows) == set(expected)
    for name, (total, pct) in expected.items():
        assert rows[name].endswith(f",{total},{pct}"), rows[name]


def test_matrix_concurrency_identical_output(fleet_dir, tmp_path):
    seq = tmp_path / "seq.csv"
    par = tmp_path / "par.csv"
    assert main(["--dir", str(fleet_dir), "--matrix", "--format", "csv", "-o", str(seq)]) == 0
    assert main(["--dir", str(fleet_dir), "--matrix", "--format", "csv", "--jobs", "4", "-o", str(par)]) == 0
    assert seq.read_bytes() == par.read_bytes()


def test_batch_continues_past_corrupt_file(fleet_dir, tmp_path, capsys):
    workdir = tmp_path / "mixed"
    workdir.mkdir()
    (workdir / "good.apk").write_bytes((fleet_dir / "starling-like.apk").read_bytes())
    (workdir / "broken.apk").write_bytes(b"\x00garbage\x00")
    assert main(["--dir", str(workdir)]) == 3
    captured = capsys.readouterr()
    assert "Security report: good.apk" in captured.out
    assert "broken.apk" in captured.err
    assert "1 of 2 file(s) failed" in captured.err


def test_batch_reports_in_input_order(fleet_dir, capsys):
    a = str(fleet_dir / "monzo-like.apk")
    b = str(fleet_dir / "atom-like.apk")
    assert main([a, b]) in (0, 1)
    out = capsys.readouterr().out
    assert out.index("monzo-like.apk") < out.index("atom-like.apk")


def test_batch_empty_dir_exit_three(tmp_path, capsys):
    empty = tmp_path / "empty"
    empty.mkdir()
    assert main(["--dir", str(empty)]) == 3
    assert "no .apk files" in capsys.readouterr().err


def test_batch_json_is_valid_array(fleet_dir, capsys):
    assert main([str(fleet_dir / "starling-like.apk"), str(fleet_dir / "atom-like.apk"), "--format", "json"]) == 0
    docs = json.loads(capsys.readouterr().out)
    assert [d["apk_name"] for d in docs] == ["starling-like.apk", "atom-like.apk"]


def test_module_entry_point_subprocess(fleet_dir):
    proc = subprocess.run(
        [sys.executable, "-m", "bankscan", "-f", str(fleet_dir / "revolut-like.apk"), "--fail-on", "critical"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 1
    assert "Security report" in proc.stdout
