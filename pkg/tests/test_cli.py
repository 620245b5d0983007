"""CLI surface: values, formats, exit codes, session workflow."""

import json

import pytest

from rlapoll.cli import cli_dispatch

CONTEST_75 = {"name": "Demo", "tallies": {"A": 7500, "B": 2500}, "total_ballots": 10000}


@pytest.fixture
def contest_file(tmp_path):
    path = tmp_path / "contest.json"
    path.write_text(json.dumps(CONTEST_75))
    return str(path)


def run(capsys, *argv):
    code = cli_dispatch(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestKmin:
    def test_eor_worked_example(self, capsys):
        code, out, _ = run(capsys, "kmin", "--rule", "eor-bravo", "--p", "0.75", "--alpha", "0.1", "--n", "50")
        assert code == 0
        assert out.strip() == "34"

    def test_minerva_worked_example(self, capsys):
        code, out, _ = run(capsys, "kmin", "--rule", "minerva", "--p", "0.75", "--alpha", "0.1", "--rounds", "50")
        assert code == 0
        assert out.strip() == "31"

    def test_athena_worked_example(self, capsys):
        code, out, _ = run(
            capsys, "kmin", "--rule", "athena", "--delta", "1", "--p", "0.75", "--alpha", "0.1", "--rounds", "50"
        )
        assert code == 0
        assert out.strip() == "32"

    def test_multi_round_json(self, capsys):
        code, out, _ = run(
            capsys, "kmin", "--rule", "minerva", "--p", "0.75", "--alpha", "0.1",
            "--rounds", "50,100", "--format", "json",
        )
        assert code == 0
        rows = json.loads(out)
        assert rows[0] == {"n": 50, "kmin": 31}
        assert rows[1]["n"] == 100

    def test_margin_flag(self, capsys):
        code, out, _ = run(capsys, "kmin", "--rule", "eor-bravo", "--margin", "0.5", "--alpha", "0.1", "--n", "50")
        assert code == 0
        assert out.strip() == "34"


class TestRatio:
    def test_worked_example_values(self, capsys):
        code, out, _ = run(
            capsys, "ratio", "--rule", "minerva", "--p", "0.75", "--alpha", "0.1",
            "--rounds", "50", "--k", "32", "--format", "json",
        )
        assert code == 0
        doc = json.loads(out)
        assert doc["sigma"] == pytest.approx(1.6458, abs=1e-4)
        assert doc["tail_ratio"] == pytest.approx(29.927, abs=1e-3)
        assert doc["kmin"] == 31


class TestRoundSize:
    def test_unscaled_halving(self, capsys):
        code, out_a, _ = run(
            capsys, "round-size", "--rule", "athena", "--delta", "1",
            "--margin", "0.1677", "--alpha", "0.1", "--target", "0.9",
        )
        assert code == 0
        code, out_e, _ = run(
            capsys, "round-size", "--rule", "eor-bravo",
            "--margin", "0.1677", "--alpha", "0.1", "--target", "0.9",
        )
        assert code == 0
        ratio = int(out_a) / int(out_e)
        assert ratio == pytest.approx(0.50, abs=0.02)

    def test_contest_scaling(self, capsys, tmp_path):
        alaska = {
            "name": "Alaska",
            "tallies": {"Clinton": 116454, "Trump": 163387},
            "total_ballots": 318608,
        }
        path = tmp_path / "alaska.json"
        path.write_text(json.dumps(alaska))
        code, out, _ = run(
            capsys, "round-size", "--rule", "athena", "--delta", "1",
            "--alpha", "0.1", "--target", "0.9", "--contest", str(path),
        )
        assert code == 0
        assert out.strip() == "295"


class TestTable:
    def test_bravo_percentiles_csv(self, capsys, tmp_path):
        dest = tmp_path / "table.csv"
        code, _, _ = run(
            capsys, "table", "bravo-percentiles", "--margins", "0.4",
            "--format", "csv", "--out", str(dest),
        )
        assert code == 0
        lines = dest.read_text().strip().splitlines()
        header = lines[0].split(",")
        row = dict(zip(header, lines[1].split(",")))
        assert row["pct_50"] == "22"
        assert float(row["expected_ballots"]) == pytest.approx(29.47, rel=0.005)


class TestSimulate:
    def test_seeded_run(self, capsys, contest_file):
        code, out, _ = run(
            capsys, "simulate", "--rule", "minerva", "--alpha", "0.1",
            "--contest", contest_file, "--rounds", "60", "--trials", "400",
            "--seed", "11", "--format", "json",
        )
        assert code == 0
        doc = json.loads(out)
        assert doc["trials"] == 400
        assert 0.7 < doc["stop_rate"] <= 1.0
        code2, out2, _ = run(
            capsys, "simulate", "--rule", "minerva", "--alpha", "0.1",
            "--contest", contest_file, "--rounds", "60", "--trials", "400",
            "--seed", "11", "--format", "json",
        )
        assert json.loads(out2) == doc


class TestAuditWorkflow:
    def test_full_session(self, capsys, contest_file, tmp_path):
        session = str(tmp_path / "session.json")
        code, out, _ = run(
            capsys, "audit", "new", "--contest", contest_file, "--rule", "minerva",
            "--alpha", "0.1", "--rounds", "50,100", "--session", session, "--id", "demo1",
        )
        assert code == 0
        assert out.strip() == "demo1"

        code, out, _ = run(
            capsys, "audit", "round", "--session", session,
            "--draws", "50", "--winner", "32", "--loser", "18", "--format", "json",
        )
        assert code == 0
        doc = json.loads(out)
        assert doc["kmin"] == 31
        assert doc["decision"] == "correct"
        assert doc["status"] == "stopped-correct"

        code, out, _ = run(capsys, "audit", "status", "--session", session, "--format", "json")
        assert code == 0
        assert json.loads(out)["status"] == "stopped-correct"

        code, out, _ = run(capsys, "audit", "report", "--session", session, "--format", "json")
        assert code == 0
        rep = json.loads(out)
        assert rep["cum_risk"] <= 0.1

    def test_schedule_violation_is_data_error(self, capsys, contest_file, tmp_path):
        session = str(tmp_path / "session.json")
        run(capsys, "audit", "new", "--contest", contest_file, "--rule", "minerva",
            "--rounds", "50", "--session", session)
        code, _, err = run(
            capsys, "audit", "round", "--session", session,
            "--draws", "48", "--winner", "30", "--loser", "18",
        )
        assert code == 3
        assert "schedule" in err.lower() or "48" in err

    def test_amend_flag_accepts_offschedule_round(self, capsys, contest_file, tmp_path):
        session = str(tmp_path / "session.json")
        run(capsys, "audit", "new", "--contest", contest_file, "--rule", "minerva",
            "--rounds", "50", "--session", session)
        code, out, _ = run(
            capsys, "audit", "round", "--session", session, "--amend",
            "--draws", "48", "--winner", "30", "--loser", "18", "--format", "json",
        )
        assert code == 0
        assert json.loads(out)["decision"] in ("correct", "undetermined")


class TestExitCodes:
    def test_unknown_flag_is_usage_error(self, capsys):
        code, _, _ = run(capsys, "kmin", "--rule", "eor-bravo", "--nope", "1")
        assert code == 2

    def test_missing_p_is_usage_error(self, capsys):
        code, _, err = run(capsys, "kmin", "--rule", "eor-bravo", "--n", "50")
        assert code == 2
        assert "usage error" in err

    def test_missing_contest_file_is_data_error(self, capsys):
        code, _, _ = run(capsys, "round-size", "--rule", "minerva", "--contest", "/nonexistent.json")
        assert code == 3

    def test_bad_dataset_is_data_error(self, capsys, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("state,clinton,trump,total_ballots\nX,1,zzz,3\n")
        code, _, err = run(capsys, "ingest", str(bad))
        assert code == 3
        assert "line" in err


class TestIngest:
    def test_bundled_format(self, capsys, tmp_path):
        csv_text = "state,clinton,trump,total_ballots\nAlaska,116454,163387,318608\n"
        f = tmp_path / "mini.csv"
        f.write_text(csv_text)
        code, out, _ = run(capsys, "ingest", str(f), "--format", "json")
        assert code == 0
        rows = json.loads(out)
        assert rows[0]["margin"] == 0.1677
