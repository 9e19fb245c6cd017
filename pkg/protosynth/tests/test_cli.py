"""Tests for the protosynth command line."""

import json

import pytest
from click.testing import CliRunner

from conftest import corpus_path
from protosynth.__main__ import EXIT_FOUND, EXIT_LIMIT, EXIT_OK, EXIT_USAGE, cli, main


@pytest.fixture
def runner():
    return CliRunner()


def sketch(name):
    return str(corpus_path(name))


def test_synth_json(runner):
    """Test a solved sketch exits 0 with the completion and counters in the report"""
    result = runner.invoke(cli, ["synth", sketch("toy2pc"), "--json"])
    assert result.exit_code == EXIT_OK
    report = json.loads(result.output)
    assert report["command"] == "synth"
    assert report["outcome"] == "solution"
    assert report["completion"] == {"h1": "vote_yes union {n}"}
    assert report["stats"]["verifier_calls"] == 3
    assert report["stats"]["constraints_added"] == 2
    assert "wall_time" not in report["stats"]


def test_synth_json_is_reproducible(runner):
    first = runner.invoke(cli, ["synth", sketch("lock_server"), "--json"])
    second = runner.invoke(cli, ["synth", sketch("lock_server"), "--json"])
    assert first.exit_code == second.exit_code == EXIT_OK
    assert first.output == second.output


def test_synth_text(runner):
    result = runner.invoke(cli, ["synth", sketch("toy2pc")])
    assert result.exit_code == EXIT_OK
    assert "Outcome: solution" in result.output
    assert "?h1 := vote_yes union {n}" in result.output


def test_synth_unrealizable(runner):
    result = runner.invoke(cli, ["synth", sketch("toy2pc_pruned"), "--json"])
    assert result.exit_code == EXIT_FOUND
    report = json.loads(result.output)
    assert report["outcome"] == "unrealizable"
    assert report["completion"] is None


def test_synth_ablation_flags(runner):
    result = runner.invoke(cli, ["synth", sketch("toy2pc"), "--json", "--no-reduction"])
    assert result.exit_code == EXIT_OK
    assert json.loads(result.output)["stats"]["candidates_enumerated"] == 17


def test_candidate_budget(runner):
    result = runner.invoke(cli, ["synth", sketch("toy2pc"), "--json", "--candidate-budget", "1"])
    assert result.exit_code == EXIT_LIMIT
    assert json.loads(result.output)["outcome"] == "budget"


def test_invalid_timeout(runner):
    result = runner.invoke(cli, ["synth", sketch("toy2pc"), "--timeout", "0"])
    assert result.exit_code == EXIT_USAGE
    assert "timeout_seconds must be positive" in result.output


def test_dump_constraints_and_cache(runner, tmp_path):
    constraints = tmp_path / "constraints.json"
    cache = tmp_path / "cache.json"
    result = runner.invoke(cli, [
        "synth", sketch("toy2pc"),
        "--dump-constraints", str(constraints),
        "--dump-cache", str(cache),
    ])
    assert result.exit_code == EXIT_OK
    dumped = json.loads(constraints.read_text())
    assert len(dumped) == 2
    assert all("or" in pc for pc in dumped)
    (hole,) = json.loads(cache.read_text())
    assert hole["hole"] == "h1"
    assert len(hole["interps"]) == 5


def test_check_violation(runner):
    """Test checking a completed sketch prints the run to the broken invariant"""
    result = runner.invoke(cli, ["check", sketch("toy2pc_completed"), "--json"])
    assert result.exit_code == EXIT_FOUND
    report = json.loads(result.output)
    assert report["outcome"] == "violation"
    assert report["counterexample"]["kind"] == "safety"
    assert len(report["counterexample"]["taken"]) == 3


def test_check_text(runner):
    result = runner.invoke(cli, ["check", sketch("toy2pc_completed")])
    assert result.exit_code == EXIT_FOUND
    assert "Violation (safety) of always(go_commit = {}):" in result.output
    assert "-- GoCommit() -->" in result.output


def test_check_refuses_holes(runner):
    result = runner.invoke(cli, ["check", sketch("toy2pc")])
    assert result.exit_code == EXIT_USAGE
    assert "use synth instead" in result.output


def test_check_refuses_search_flags(runner):
    result = runner.invoke(cli, ["check", sketch("toy2pc_completed"), "--no-pruning"])
    assert result.exit_code != EXIT_OK


def test_enumerate_classes(runner):
    result = runner.invoke(cli, ["enumerate-classes", sketch("toy2pc"), "--interps", "2", "--json"])
    assert result.exit_code == EXIT_OK
    (row,) = json.loads(result.output)["holes"]
    assert row["classes"] == {"E": 2}
    assert row["oracle_classes"] == {"E": 2}
    assert row["coverage_ok"]


def test_enumerate_classes_text(runner):
    result = runner.invoke(cli, ["enumerate-classes", sketch("toy2pc")])
    assert result.exit_code == EXIT_OK
    assert "?h1 [8 interpretations] E: 8 (oracle 8) -- ok" in result.output


def test_parse_error(runner, tmp_path):
    bad = tmp_path / "bad.sketch"
    bad.write_text("sort Node\nvar vote_yes : set Node\n")
    result = runner.invoke(cli, ["synth", str(bad)])
    assert result.exit_code == EXIT_USAGE
    assert f"{bad}:1:" in result.output


def test_undecodable_file(runner, tmp_path):
    """Test a file that is not UTF-8 is a usage error with a located diagnostic"""
    bad = tmp_path / "bin.sketch"
    bad.write_bytes(b"\xff\xfe")
    result = runner.invoke(cli, ["check", str(bad)])
    assert result.exit_code == EXIT_USAGE
    assert f"{bad}:1:1: invalid UTF-8 byte 0xff" in result.output
    assert main(["synth", str(bad)]) == EXIT_USAGE


def test_missing_file(runner, tmp_path):
    result = runner.invoke(cli, ["synth", str(tmp_path / "nowhere.sketch")])
    assert result.exit_code == EXIT_USAGE


def test_main_returns_exit_codes():
    assert main(["synth", "--bogus"]) == EXIT_USAGE
    assert main(["check", sketch("toy2pc_completed")]) == EXIT_FOUND
    assert main(["synth", sketch("toy2pc")]) == EXIT_OK
