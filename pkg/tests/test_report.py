"""Tests for JSON and CSV report output."""

import csv
import json
import math

import numpy as np
import pytest

from core.report import REPORT_KEYS, Report, emit_report, render_csv, render_json, report_to_dict, write_table


@pytest.fixture
def report():
    return Report(
        experiment="demo",
        config_digest="abc123",
        seed=4,
        tolerances={"tol": 1e-10, "cycle_tol": 1e-6},
        summary={"alpha": 0.297, "beta_hat": math.inf, "slope": None, "ok": True},
    )


class TestJson:
    def test_key_order(self, report):
        assert list(json.loads(render_json(report))) == list(REPORT_KEYS)

    def test_non_finite_values_become_strings(self, report):
        report.summary["gap"] = float("nan")
        report.summary["floor"] = -math.inf
        data = report_to_dict(report)
        assert data["summary"]["beta_hat"] == "inf"
        assert data["summary"]["gap"] == "nan"
        assert data["summary"]["floor"] == "-inf"

    def test_numpy_values(self, report):
        report.summary["n"] = np.int64(3)
        report.summary["x0"] = np.array([0.5, 0.25])
        report.summary["value"] = np.float64(1.5)
        data = json.loads(render_json(report))
        assert data["summary"]["n"] == 3
        assert data["summary"]["x0"] == [0.5, 0.25]
        assert data["summary"]["value"] == 1.5

    def test_error_fields(self, report):
        report.error = "Diverged"
        report.hint = "Run check-bunching"
        data = json.loads(render_json(report))
        assert data["error"] == "Diverged"
        assert data["samples"] is None


class TestCsv:
    def test_dotted_keys(self, report):
        rows = list(csv.reader(render_csv(report).splitlines()))
        assert rows[0] == ["key", "value"]
        values = dict(rows[1:])
        assert values["experiment"] == "demo"
        assert values["tolerances.tol"] == "1e-10"
        assert values["summary.beta_hat"] == "inf"
        assert values["summary.ok"] == "true"
        assert values["summary.slope"] == ""

    def test_separators_are_quoted(self, report):
        report.summary["note"] = 'a,b "c"'
        text = render_csv(report)
        assert 'summary.note,"a,b ""c"""\n' in text
        values = dict(list(csv.reader(text.splitlines()))[1:])
        assert values["summary.note"] == 'a,b "c"'

    def test_samples_joined(self, report, tmp_path):
        write_table(report, tmp_path, "legs", ("a",), [[1]])
        write_table(report, tmp_path, "grid", ("b",), [[2]])
        values = dict(list(csv.reader(render_csv(report).splitlines()))[1:])
        assert values["samples"] == "demo_legs.csv;demo_grid.csv"


class TestEmit:
    def test_json_file(self, report, tmp_path):
        path = emit_report(report, tmp_path / "out", "json")
        assert path.name == "demo.json"
        assert json.loads(path.read_text())["seed"] == 4

    def test_csv_file(self, report, tmp_path):
        path = emit_report(report, tmp_path, "csv")
        assert path.name == "demo.csv"
        assert path.read_text().startswith("key,value\n")

    def test_unknown_format(self, report, tmp_path):
        with pytest.raises(ValueError):
            emit_report(report, tmp_path, "xml")

    def test_same_report_same_bytes(self, report, tmp_path):
        first = emit_report(report, tmp_path / "a").read_bytes()
        second = emit_report(report, tmp_path / "b").read_bytes()
        assert first == second

    def test_unwritable_directory(self, report, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("")
        with pytest.raises(OSError, match="cannot write"):
            emit_report(report, blocker / "sub")


class TestTables:
    def test_table_is_recorded(self, report, tmp_path):
        path = write_table(report, tmp_path, "legs", ("leg_type", "t"), [["stable", 0.25], ["unstable", -0.5]])
        assert path.name == "demo_legs.csv"
        assert report.samples == ["demo_legs.csv"]
        rows = list(csv.reader(path.read_text().splitlines()))
        assert rows == [["leg_type", "t"], ["stable", "0.25"], ["unstable", "-0.5"]]
