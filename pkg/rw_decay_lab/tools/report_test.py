"""Tests for report emission"""

import csv
import json
import os
import shutil
import tempfile
import unittest
from pathlib import Path
from unittest.mock import patch

import numpy as np

from rw_decay_lab.tools.report import (
    CSV_COLUMNS,
    Check,
    ExperimentResult,
    Number,
    ReportSummary,
    emit_report,
    report_schema,
)


def sample_result():
    result = ExperimentResult(run_id="demo", kind="evolve", config={"tolerances": {"tail_exponent": 0.3}})
    for t in np.linspace(0.0, 1.0, 5):
        result.add("observer_psi", np.exp(-t), ell=2, axis="t", coordinate=t)
    result.add("proved_exponent", -6.0, ell=2, provenance="paper-reference")
    result.add_series("observer_l2", [0.0, 0.5, 1.0], [1.0, 0.6, 0.37])
    result.fits["tail_amplitude_l2"] = Number(value=1.5, provenance="fitted-constant")
    result.checks.append(Check.evaluate("tail_bound_l2", -6.4, -6.0, 0.0, "at_most",
                                        reference_provenance="paper-reference"))
    return result


class TestCheck(unittest.TestCase):

    def test_rules(self):
        self.assertTrue(Check.evaluate("a", -2.9, -3.0, 0.3, reference_provenance="derived").passed)
        self.assertFalse(Check.evaluate("a", -3.4, -3.0, 0.3, reference_provenance="derived").passed)
        self.assertTrue(Check.evaluate("b", -5.0, -4.0, 0.0, "at_most", reference_provenance="derived").passed)
        self.assertFalse(Check.evaluate("b", -3.9, -4.0, 0.0, "at_most", reference_provenance="derived").passed)
        self.assertTrue(Check.evaluate("c", 12.0, 10.0, 0.0, "at_least", reference_provenance="derived").passed)
        self.assertTrue(Check.evaluate("d", 3.5, 2.0, 2.0, "ratio_within", reference_provenance="derived").passed)
        self.assertFalse(Check.evaluate("d", 0.9, 2.0, 2.0, "ratio_within", reference_provenance="derived").passed)
        self.assertFalse(Check.evaluate("e", float("nan"), 0.0, 1.0, reference_provenance="derived").passed)

    def test_provenance(self):
        check = Check.evaluate("a", 1.0, 1.0, 0.1, provenance="fitted-constant", reference_provenance="paper-reference")
        self.assertEqual(check.measured.provenance, "fitted-constant")
        self.assertEqual(check.reference.provenance, "paper-reference")

    def test_reference_provenance_is_required(self):
        with self.assertRaises(TypeError):
            Check.evaluate("a", 1.0, 1.0, 0.1)

    def test_derived_slope_target(self):
        # low-energy Wronskian slope of the normalized l = 2 mode: 1/2 - l
        check = Check.evaluate("wronskian_low_energy_slope_l2", -1.45, 0.5 - 2, 0.15, reference_provenance="derived")
        self.assertTrue(check.passed)
        self.assertEqual(check.reference.provenance, "derived")
        self.assertEqual(check.measured.provenance, "computed")


class TestEmitReport(unittest.TestCase):

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.temp_dir)

    def test_files(self):
        result = sample_result()
        files = emit_report(result, self.temp_dir)
        with open(files.table, newline="", encoding="utf-8") as handle:
            rows = list(csv.reader(handle))
        self.assertEqual(tuple(rows[0]), CSV_COLUMNS)
        self.assertEqual(len(rows) - 1, len(result.rows))
        self.assertEqual(rows[1][:6], ["demo", "observer_psi", "2", "", "t", "0.0"])
        self.assertTrue(all(row[-1] in ("computed", "paper-reference", "fitted-constant", "derived") for row in rows[1:]))
        self.assertNotIn(b"\r\n", Path(files.table).read_bytes())

        summary = ReportSummary.model_validate_json(Path(files.summary).read_text(encoding="utf-8"))
        self.assertTrue(summary.passed)
        self.assertEqual(summary.rows, 6)
        self.assertEqual(summary.tolerances, {"tail_exponent": 0.3})
        self.assertEqual(summary.fits["tail_amplitude_l2"].provenance, "fitted-constant")

        self.assertEqual(len(files.series), 1)
        data = np.loadtxt(files.series[0])
        self.assertEqual(data.shape, (3, 2))

    def test_summary_matches_schema(self):
        result = sample_result()
        result.checks.append(Check.evaluate("wronskian_low_energy_slope_l2", -1.45, -1.5, 0.15,
                                            reference_provenance="derived"))
        files = emit_report(result, self.temp_dir)
        text = Path(files.summary).read_text(encoding="utf-8")
        document = json.loads(text)
        schema = report_schema()
        self.assertTrue(set(schema["required"]) <= set(document))
        self.assertTrue(set(document) <= set(schema["properties"]))
        summary = ReportSummary.model_validate_json(text)
        self.assertEqual(summary.model_dump(mode="json"), document)
        self.assertEqual(summary.checks[-1].reference.provenance, "derived")
        self.assertEqual([c.name for c in summary.checks], [c.name for c in result.checks])

    def test_idempotent(self):
        result = sample_result()
        first = emit_report(result, self.temp_dir)
        contents = [Path(p).read_bytes() for p in (first.table, first.summary, *first.series)]
        second = emit_report(result, self.temp_dir)
        self.assertEqual(contents, [Path(p).read_bytes() for p in (second.table, second.summary, *second.series)])

    def test_failed_check_in_summary(self):
        result = sample_result()
        result.checks.append(Check.evaluate("tail_l0", -2.0, -3.0, 0.3, reference_provenance="paper-reference"))
        files = emit_report(result, os.path.join(self.temp_dir, "nested", "dir"))
        summary = ReportSummary.model_validate_json(Path(files.summary).read_text(encoding="utf-8"))
        self.assertFalse(summary.passed)

    def test_io_error(self):
        with patch.object(Path, "mkdir", side_effect=PermissionError("read-only")):
            with self.assertRaises(OSError) as context:
                emit_report(sample_result(), os.path.join(self.temp_dir, "blocked"))
        self.assertIn("Failed to write report", str(context.exception))


if __name__ == '__main__':
    unittest.main(verbosity=2)
