"""Tests for utils/numerics.py, utils/report_io.py and the settings in store.py."""
import csv
import io
import json
import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import store
from errors import ConfigError, RankDeficientError, TransportError
from models import CheckResult, DefectValue, Report
from utils.numerics import (
    central_difference,
    gram_schmidt,
    numerical_rank,
    orthonormality_defect,
    rk4_integrate,
    running_max,
    second_differences,
    stable_rank_order,
    sweep,
)
from utils.report_io import CSV_COLUMNS, defect_rows, load_config, report_json, write_csv, write_report


# ---------------------------------------------------------------------------
# Finite differences and integration
# ---------------------------------------------------------------------------

class TestDifferences:
    def test_central_difference_of_quadratic(self):
        f = lambda x: np.array([x[0] ** 2 + 3 * x[1], x[0] * x[1]])
        d = central_difference(f, np.array([1.0, 2.0]), 1e-3)
        np.testing.assert_allclose(d, [[2.0, 2.0], [3.0, 1.0]], atol=1e-9)

    def test_second_differences_are_symmetric(self):
        f = lambda x: np.sin(x[0]) * np.exp(x[1])
        first, second = second_differences(f, np.array([0.3, -0.1]), 1e-4)
        np.testing.assert_allclose(first, [np.cos(0.3) * np.exp(-0.1), np.sin(0.3) * np.exp(-0.1)], atol=1e-7)
        assert second[0, 1] == second[1, 0]
        assert second[0, 0] == pytest.approx(-np.sin(0.3) * np.exp(-0.1), abs=1e-5)


class TestRk4:
    def test_exponential(self):
        y = rk4_integrate(lambda t, y: y, np.array([1.0]), 0.0, 1.0, steps=100)
        assert y[0] == pytest.approx(np.e, rel=1e-9)

    def test_backwards(self):
        y = rk4_integrate(lambda t, y: -y, np.array([1.0]), 1.0, 0.0, steps=100)
        assert y[0] == pytest.approx(np.e, rel=1e-9)

    def test_on_step_sees_every_step(self):
        times = []
        rk4_integrate(lambda t, y: np.zeros(1), np.zeros(1), 0.0, 1.0, steps=4, on_step=lambda t, y: times.append(t))
        assert times == [0.25, 0.5, 0.75, 1.0]

    def test_needs_a_step(self):
        with pytest.raises(TransportError):
            rk4_integrate(lambda t, y: y, np.ones(1), 0.0, 1.0, steps=0)

    def test_step_underflow(self):
        with pytest.raises(TransportError, match="underflow"):
            rk4_integrate(lambda t, y: y, np.ones(1), 0.0, 1e-15, steps=10)

    def test_divergence(self):
        with pytest.raises(TransportError, match="diverged"):
            rk4_integrate(lambda t, y: y ** 2, np.array([1.0]), 0.0, 2.0, steps=20)


# ---------------------------------------------------------------------------
# Linear algebra
# ---------------------------------------------------------------------------

class TestLinearAlgebra:
    def test_gram_schmidt_in_a_metric(self):
        metric = np.diag([4.0, 1.0, 9.0])
        vectors = np.array([[1.0, 1.0, 0.0], [0.0, 1.0, 1.0], [0.0, 0.0, 1.0]])
        basis = gram_schmidt(vectors, metric)
        assert orthonormality_defect(basis, metric) < 1e-14

    def test_gram_schmidt_rank_deficient(self):
        vectors = np.array([[1.0, 2.0], [0.0, 0.0]])
        with pytest.raises(RankDeficientError, match="Vector 1"):
            gram_schmidt(vectors, np.eye(2))

    def test_numerical_rank(self):
        assert numerical_rank(np.zeros((4, 3))) == 0
        assert numerical_rank(np.diag([1.0, 1e-3, 1e-12])) == 2
        assert numerical_rank(np.outer([1.0, 2.0], [3.0, 4.0])) == 1


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

class TestSweep:
    def test_keeps_input_order_with_threads(self):
        assert sweep(lambda x: x * x, range(50), threads=4) == [x * x for x in range(50)]

    def test_single_thread_runs_inline(self):
        seen = set()

        def record(x):
            seen.add(threading.get_ident())
            return x

        sweep(record, range(4), threads=1)
        assert seen == {threading.get_ident()}

    def test_running_max_ties_keep_first(self):
        assert running_max([(1.0, "a"), (3.0, "b"), (3.0, "c"), (2.0, "d")]) == (3.0, "b")

    def test_running_max_empty(self):
        assert running_max([]) == (0.0, None)

    def test_running_max_all_zero_keeps_a_location(self):
        assert running_max([(0.0, "a"), (0.0, "b")]) == (0.0, "a")

    @given(st.lists(st.floats(min_value=-1e3, max_value=1e3, allow_nan=False)))
    @settings(max_examples=60)
    def test_stable_rank_order(self, scores):
        order = stable_rank_order(scores)
        assert sorted(order) == list(range(len(scores)))
        for a, b in zip(order, order[1:]):
            assert scores[a] > scores[b] or (scores[a] == scores[b] and a < b)


# ---------------------------------------------------------------------------
# Scenario files and reports
# ---------------------------------------------------------------------------

def _report():
    checks = [
        CheckResult(name="lagrangian", status="pass", defects=[
            DefectValue(name="omega_plus", value=1e-9, tolerance=1e-5, argmax=[1, 2, 3, 0.5]),
            DefectValue(name="frame_metric", value=2e-12, tolerance=1e-5),
        ]),
        CheckResult(name="converse", status="error", error="TransportError: boom"),
    ]
    return Report(status="error", config={"surface": "veronese"}, checks=checks)


class TestReportIo:
    def test_load_config(self, tmp_path):
        path = tmp_path / "scenario.json"
        path.write_text(json.dumps({"surface": "veronese", "lambdas": [2.0]}), encoding="utf-8")
        config = load_config(path)
        assert config.lambdas == [2.0]

    @pytest.mark.parametrize("payload, message", [
        ("[1, 2", "not valid JSON"),
        ('{"surface": "veronese", "n_theta": 2}', "Invalid scenario"),
    ])
    def test_load_config_errors(self, tmp_path, payload, message):
        path = tmp_path / "scenario.json"
        path.write_text(payload, encoding="utf-8")
        with pytest.raises(ConfigError, match=message):
            load_config(path)

    def test_load_config_missing(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "absent.json")

    def test_report_json_uses_schema_alias(self):
        data = json.loads(report_json(_report()))
        assert data["schema"] == store.REPORT_SCHEMA
        assert data["checks"][1]["error"] == "TransportError: boom"

    def test_write_report_ends_with_newline(self):
        stream = io.StringIO()
        write_report(_report(), stream)
        assert stream.getvalue().endswith("}\n")

    def test_defect_rows(self):
        rows = defect_rows(_report())
        assert [r["defect"] for r in rows] == ["omega_plus", "frame_metric", ""]
        assert rows[0]["argmax"] == "[1, 2, 3, 0.5]"
        assert rows[2]["argmax"] == "TransportError: boom"

    def test_write_csv(self, tmp_path):
        path = write_csv(_report(), tmp_path / "nested" / "table.csv")
        with path.open(newline="", encoding="utf-8") as handle:
            rows = list(csv.DictReader(handle))
        assert len(rows) == 3
        assert list(rows[0]) == CSV_COLUMNS == ["check", "status", "defect", "value", "tolerance", "passed", "argmax"]
        assert float(rows[0]["value"]) == 1e-9
        assert rows[0]["passed"] == "True"


# ---------------------------------------------------------------------------
# Settings
# ---------------------------------------------------------------------------

class TestStore:
    def test_merged_tolerances(self):
        merged = store.merged_tolerances({"lie": 1e-10})
        assert merged["lie"] == 1e-10
        assert store.DEFAULT_TOLERANCES["lie"] == 1e-13

    def test_unknown_key(self):
        with pytest.raises(KeyError):
            store.merged_tolerances({"nope": 1.0})

    def test_environment_from_conftest(self):
        assert store.THREADS == 1
        assert store.LOG_LEVEL == "WARNING"
