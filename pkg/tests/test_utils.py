"""
Tests for utils.py
Tests: error formatting, settings, seed parsing, config files, calibration, run history
"""
import json
import os
import sys
import tempfile
import unittest
from unittest.mock import patch

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from utils import (DEFAULT_SEED, DEFAULT_THRESHOLDS, DomainHypothesisError, FieldError, LabError,
                   MeshError, UsageError, fetch_checks, fetch_runs, get_settings, is_truthy,
                   load_calibration, parse_seed, read_config_file, record_run, save_calibration,
                   short_hash)

# ─── errors ───────────────────────────────────────────────────────

class TestErrors(unittest.TestCase):

    def test_message_only(self):
        self.assertEqual(str(MeshError("bad mesh")), "bad mesh")

    def test_details_in_str(self):
        err = MeshError("cell has non-positive signed volume", cell=3, line=12)
        self.assertEqual(str(err), "cell has non-positive signed volume (cell=3, line=12)")
        self.assertEqual(err.details["line"], 12)

    def test_hierarchy(self):
        self.assertTrue(issubclass(DomainHypothesisError, FieldError))
        for cls in (MeshError, FieldError, UsageError):
            self.assertTrue(issubclass(cls, LabError))


# ─── settings ─────────────────────────────────────────────────────

class TestSettings(unittest.TestCase):

    def test_defaults(self):
        s = get_settings({})
        self.assertEqual(s.seed, DEFAULT_SEED)
        self.assertEqual(s.threads, 1)
        self.assertFalse(s.slow)

    def test_environment_overrides(self):
        s = get_settings({"BELTRAMI_LAB_SEED": "0x10", "BELTRAMI_LAB_THREADS": "4",
                          "BELTRAMI_LAB_SLOW": "yes", "BELTRAMI_LAB_RESULTS_DB": "x.db"})
        self.assertEqual(s.seed, 16)
        self.assertEqual(s.threads, 4)
        self.assertTrue(s.slow)
        self.assertEqual(s.results_db, "x.db")

    def test_bad_threads(self):
        with self.assertRaises(UsageError):
            get_settings({"BELTRAMI_LAB_THREADS": "0"})
        with self.assertRaises(UsageError):
            get_settings({"BELTRAMI_LAB_THREADS": "many"})

    def test_reads_os_environ_when_no_mapping(self):
        with patch.dict(os.environ, {"BELTRAMI_LAB_SEED": "7"}):
            self.assertEqual(get_settings().seed, 7)

    def test_is_truthy(self):
        for value in ("1", "true", "TRUE", " yes "):
            self.assertTrue(is_truthy(value))
        for value in (None, "", "0", "no", "off"):
            self.assertFalse(is_truthy(value))


class TestParseSeed(unittest.TestCase):

    def test_decimal_and_hex(self):
        self.assertEqual(parse_seed("42"), 42)
        self.assertEqual(parse_seed("0x5EED"), 0x5EED)
        self.assertEqual(parse_seed(9), 9)

    def test_rejects_garbage(self):
        with self.assertRaises(UsageError):
            parse_seed("seed")

    def test_rejects_negative(self):
        with self.assertRaises(UsageError):
            parse_seed("-3")


# ─── config file ──────────────────────────────────────────────────

class TestReadConfigFile(unittest.TestCase):

    def test_keys_normalized(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "lab.cfg")
            with open(path, "w") as f:
                f.write("n = 8\nrel-tol=0.05\n# comment\nDOMAIN=disk\n")
            config = read_config_file(path)
        self.assertEqual(config["n"], "8")
        self.assertEqual(config["rel_tol"], "0.05")
        self.assertEqual(config["domain"], "disk")

    def test_missing_file(self):
        with self.assertRaises(UsageError):
            read_config_file("/nonexistent/lab.cfg")


# ─── calibration ──────────────────────────────────────────────────

class TestCalibration(unittest.TestCase):

    def test_missing_file_gives_defaults(self):
        with tempfile.TemporaryDirectory() as tmp:
            thresholds = load_calibration(os.path.join(tmp, "none.json"))
        self.assertEqual(thresholds, DEFAULT_THRESHOLDS)

    def test_save_then_load_overrides_defaults(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "cal.json")
            save_calibration(path, {"trace_floor": 0.2}, {"trace_min": 0.4}, "unit test")
            thresholds = load_calibration(path)
            with open(path) as f:
                data = json.load(f)
        self.assertEqual(thresholds["trace_floor"], 0.2)
        self.assertEqual(thresholds["probe_contrast_ratio"], DEFAULT_THRESHOLDS["probe_contrast_ratio"])
        self.assertEqual(data["provenance"], "unit test")
        self.assertEqual(data["measurements"]["trace_min"], 0.4)


# ─── run history ──────────────────────────────────────────────────

class TestRunHistory(unittest.TestCase):

    def test_short_hash_stable(self):
        self.assertEqual(short_hash("a", 1), short_hash("a", 1))
        self.assertNotEqual(short_hash("a", 1), short_hash("a", 2))
        self.assertEqual(len(short_hash(b"bytes")), 12)

    def test_fetch_missing_db(self):
        with tempfile.TemporaryDirectory() as tmp:
            self.assertEqual(fetch_runs(os.path.join(tmp, "none.db")), [])

    def test_record_and_fetch(self):
        report = {"command": "mesh", "mesh": {"mesh_id": "abc"},
                  "results": [{"name": "boundary_closure", "value": 0.0, "pass": True}]}
        failing = {"command": "star", "mesh": None,
                   "results": [{"name": "star_margin", "value": -1.0, "pass": False}]}
        with tempfile.TemporaryDirectory() as tmp:
            db = os.path.join(tmp, "runs.db")
            first = record_run(db, report)
            second = record_run(db, failing)
            rows = fetch_runs(db)
        self.assertNotEqual(first, second)
        self.assertEqual(len(rows), 2)
        by_command = {row["command"]: row for row in rows}
        self.assertEqual(by_command["mesh"]["passed"], 1)
        self.assertEqual(by_command["mesh"]["mesh_id"], "abc")
        self.assertEqual(by_command["star"]["passed"], 0)
        self.assertIsNone(by_command["star"]["mesh_id"])

    def test_checks_keep_verdicts(self):
        report = {"command": "eig maxwell", "mesh": {"mesh_id": "cube"},
                  "results": [{"name": "converged", "value": 1.0, "pass": True, "relation": "<="},
                              {"name": "norm_u_dot_nu", "value": 0.01, "tolerance": 0.05,
                               "relation": ">=", "pass": False, "provenance": "calibration"},
                              {"name": "first_eigenvalue_rel_error", "value": 0.02,
                               "tolerance": 0.03, "pass": True, "oracle": 19.7392088}]}
        with tempfile.TemporaryDirectory() as tmp:
            db = os.path.join(tmp, "runs.db")
            run_id = record_run(db, report)
            runs = fetch_runs(db)
            checks = fetch_checks(db, run_id)
            self.assertEqual(fetch_checks(db, "other"), [])
        self.assertEqual(runs[0]["n_checks"], 3)
        self.assertEqual(runs[0]["n_failed"], 1)
        self.assertEqual(runs[0]["passed"], 0)
        self.assertEqual([c["name"] for c in checks],
                         ["converged", "norm_u_dot_nu", "first_eigenvalue_rel_error"])
        self.assertEqual(checks[1]["passed"], 0)
        self.assertEqual(checks[1]["relation"], ">=")
        self.assertEqual(checks[1]["provenance"], "calibration")
        self.assertAlmostEqual(checks[2]["oracle"], 19.7392088)
        self.assertIsNone(checks[0]["tolerance"])


if __name__ == "__main__":
    unittest.main()
