"""
Tests for cli.py
Tests: exit codes, printed summaries, JSON reports, config-file defaults, run history
"""
import io
import json
import os
import sys
import tempfile
import unittest
from contextlib import redirect_stderr, redirect_stdout

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from cli import EXIT_FAIL, EXIT_PASS, EXIT_USAGE, ResultEntry, RunReport, main, parse_args
from utils import Settings


def run(*argv):
    """main() with captured output; returns (code, stdout, stderr)."""
    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        code = main(list(argv))
    return code, out.getvalue(), err.getvalue()


# ─── exit codes ───────────────────────────────────────────────────

class TestCommands(unittest.TestCase):

    def test_mesh_summary(self):
        code, out, _ = run("mesh", "--domain", "square", "--n", "2")
        self.assertEqual(code, EXIT_PASS)
        self.assertIn("vertices=9 cells=8 facets=8 origin_excluded=0", out)

    def test_mesh_bad_radii(self):
        code, _, err = run("mesh", "--domain", "annulus", "--r0", "2", "--r1", "1")
        self.assertEqual(code, EXIT_USAGE)
        self.assertIn("r0 < r1 required", err)

    def test_mesh_unknown_domain(self):
        code, _, _ = run("mesh", "--domain", "torus")
        self.assertEqual(code, EXIT_USAGE)

    def test_converge_needs_two_levels(self):
        code, _, err = run("converge", "--domain", "square", "--levels", "1")
        self.assertEqual(code, EXIT_USAGE)
        self.assertIn("≥ 2 levels required", err)

    def test_star_square(self):
        code, out, _ = run("star", "--domain", "square", "--n", "4", "--oracle")
        self.assertEqual(code, EXIT_PASS)
        self.assertIn("margin=0.5", out)

    def test_star_annulus_fails(self):
        code, out, _ = run("star", "--domain", "annulus", "--n", "2")
        self.assertEqual(code, EXIT_FAIL)
        self.assertIn("not star-shaped at facet resolution", out)

    def test_identity_lagrange(self):
        code, out, _ = run("identity", "--check", "lagrange", "--samples", "500")
        self.assertEqual(code, EXIT_PASS)
        self.assertIn("lagrange_max_rel", out)

    def test_identity_green_polynomial(self):
        code, _, _ = run("identity", "--check", "green", "--field", "poly:x2,-x1,x3",
                         "--domain", "cube", "--n", "2", "--order", "5")
        self.assertEqual(code, EXIT_PASS)

    def test_identity_bad_field(self):
        code, _, err = run("identity", "--field", "vortex:1", "--domain", "cube", "--n", "1")
        self.assertEqual(code, EXIT_USAGE)
        self.assertIn("error:", err)

    def test_eig_dirichlet(self):
        code, out, _ = run("eig", "--problem", "dirichlet", "--domain", "square", "--n", "8",
                           "--k", "2", "--rel-tol", "0.2")
        self.assertEqual(code, EXIT_PASS)
        self.assertIn("first eigenvalue:", out)

    def test_probe_spheromak(self):
        code, out, _ = run("probe", "--mode", "spheromak", "--domain", "ball", "--n", "2")
        self.assertEqual(code, EXIT_PASS)
        self.assertIn("trace_sphere_abs", out)

    def test_defect_min_uncalibrated_ceiling(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "probe.json")
            code, _, _ = run("probe", "--bc", "normal", "--domain", "ball", "--n", "2",
                             "--iters", "5", "--restarts", "1", "--json", path,
                             "--calibration", os.path.join(tmp, "absent.json"))
            self.assertEqual(code, EXIT_PASS)
            with open(path, encoding="utf-8") as f:
                data = json.load(f)
        entry = next(r for r in data["results"] if r["name"] == "J_min")
        self.assertIsNone(entry["tolerance"])
        self.assertEqual(entry["provenance"], "uncalibrated")

    def test_compare_square(self):
        code, out, _ = run("compare", "--domain", "square", "--n", "8")
        self.assertEqual(code, EXIT_PASS)
        self.assertIn("alpha1~mu2", out)
        self.assertIn("mu2<gamma1", out)

    def test_converge_duality(self):
        code, out, _ = run("converge", "--suite", "duality", "--domain", "cube", "--levels", "2",
                           "--base", "2", "--duality-tol", "0.3")
        self.assertEqual(code, EXIT_PASS)
        self.assertIn("gap_max_increase", out)
        self.assertIn("final_witness_rel_gap", out)

    def test_no_command(self):
        code, _, _ = run()
        self.assertEqual(code, EXIT_USAGE)


# ─── reports ──────────────────────────────────────────────────────

class TestReports(unittest.TestCase):

    def test_json_round_trip(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "report.json")
            code, _, _ = run("star", "--domain", "square", "--n", "2", "--json", path)
            self.assertEqual(code, EXIT_PASS)
            with open(path, encoding="utf-8") as f:
                data = json.load(f)
        self.assertEqual(data["command"], "star")
        self.assertTrue(data["results"][0]["pass"])
        report = RunReport.from_dict(data)
        self.assertTrue(report.passed)
        self.assertEqual(report.to_dict()["results"], data["results"])
        self.assertEqual(report.mesh["vertices"], 9)

    def test_check_relations(self):
        report = RunReport(command="unit")
        self.assertTrue(report.check("small", 1e-9, 1e-8).passed)
        self.assertFalse(report.check("floor", 0.01, 0.05, relation=">=").passed)
        self.assertTrue(report.check("finite", 3.0).passed)
        self.assertFalse(report.passed)

    def test_entry_serialization(self):
        entry = ResultEntry("e", 1.0, 2.0, True, oracle=5.7831859629, provenance="bessel")
        data = entry.to_dict()
        self.assertEqual(data["pass"], True)
        self.assertEqual(ResultEntry.from_dict(data), entry)


# ─── config files ─────────────────────────────────────────────────

class TestConfig(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.settings = Settings(seed=1, threads=1, results_db=os.path.join(self.tmp.name, "r.db"),
                                 calibration_path=os.path.join(self.tmp.name, "c.json"), slow=False)

    def write_config(self, text):
        path = os.path.join(self.tmp.name, "lab.conf")
        with open(path, "w", encoding="utf-8") as f:
            f.write(text)
        return path

    def test_config_supplies_defaults(self):
        path = self.write_config("domain = square\nn = 3\n")
        args = parse_args(["mesh", "--config", path], self.settings)
        self.assertEqual(args.domain, "square")
        self.assertEqual(args.n, 3)

    def test_command_line_wins(self):
        path = self.write_config("domain = square\nn = 3\n")
        args = parse_args(["mesh", "--config", path, "--n", "5"], self.settings)
        self.assertEqual(args.n, 5)
        code, out, _ = run("mesh", "--config", path, "--n", "2")
        self.assertEqual(code, EXIT_PASS)
        self.assertIn("vertices=9", out)

    def test_boolean_flag(self):
        path = self.write_config("domain = square\noracle = yes\n")
        args = parse_args(["star", "--config", path], self.settings)
        self.assertTrue(args.oracle)

    def test_unknown_key(self):
        path = self.write_config("domain = square\nwidth = 3\n")
        code, _, err = run("mesh", "--config", path)
        self.assertEqual(code, EXIT_USAGE)
        self.assertIn("unknown config keys", err)

    def test_missing_config(self):
        code, _, _ = run("mesh", "--config", os.path.join(self.tmp.name, "absent.conf"))
        self.assertEqual(code, EXIT_USAGE)


# ─── history ──────────────────────────────────────────────────────

class TestHistory(unittest.TestCase):

    def test_empty_then_recorded(self):
        with tempfile.TemporaryDirectory() as tmp:
            db = os.path.join(tmp, "runs.db")
            code, out, _ = run("history", "--db", db)
            self.assertEqual(code, EXIT_PASS)
            self.assertIn("No runs recorded", out)

            code, out, _ = run("mesh", "--domain", "cube", "--n", "1", "--db", db)
            self.assertEqual(code, EXIT_PASS)
            self.assertIn("Recorded run", out)

            code, out, _ = run("history", "--db", db)
            self.assertEqual(code, EXIT_PASS)
            self.assertIn("PASS", out)
            self.assertIn("mesh", out)

    def test_run_checks(self):
        with tempfile.TemporaryDirectory() as tmp:
            db = os.path.join(tmp, "runs.db")
            code, out, _ = run("mesh", "--domain", "square", "--n", "2", "--db", db)
            self.assertEqual(code, EXIT_PASS)
            run_id = out.split("Recorded run ")[1].split()[0]

            code, out, _ = run("history", "--db", db)
            self.assertIn("0/1 failed", out)

            code, out, _ = run("history", "--db", db, "--run", run_id)
            self.assertEqual(code, EXIT_PASS)
            self.assertIn("boundary_closure", out)
            self.assertIn("PASS", out)

            code, _, err = run("history", "--db", db, "--run", "missing")
            self.assertEqual(code, EXIT_USAGE)
            self.assertIn("no checks recorded", err)


if __name__ == "__main__":
    unittest.main()
