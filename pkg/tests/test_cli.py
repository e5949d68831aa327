"""
Tests for the command line driver
"""

import io
import json
import tempfile
import unittest
from contextlib import redirect_stderr, redirect_stdout
from pathlib import Path

from vortexforge import cli
from vortexforge.configurations import load_builtin, load_configuration, load_scenario
from vortexforge.desingularize import BranchPoint, leading_guess
from vortexforge.diagnostics import diagnose
from vortexforge.persistence import BranchWriter, branch_header, dumps, read_branch


def run(argv):
    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        code = cli.main(argv)
    return code, out.getvalue(), err.getvalue()


class TestPointVortexCommands(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_check(self):
        """Packaged configurations are steady and non-degenerate"""
        for name in ("rotating-pair", "tripole", "translating-pair"):
            with self.subTest(name=name):
                code, out, _ = run(["pv", "check", name])
                self.assertEqual(code, cli.EXIT_OK)
                self.assertIn("steady", out)

    def test_check_not_steady(self):
        """A moved configuration is reported as not steady"""
        path = self.dir / "moved.json"
        moved = load_builtin("rotating-pair").with_coordinates([1.2], [2])
        path.write_text(dumps(moved.to_dict()), encoding="utf-8")
        code, out, _ = run(["pv", "check", str(path)])
        self.assertEqual(code, cli.EXIT_DOMAIN)
        self.assertIn("not steady", out)

    def test_classify(self):
        """Classification is printed as JSON"""
        code, out, _ = run(["pv", "classify", "tripole"])
        self.assertEqual(code, cli.EXIT_OK)
        self.assertEqual(json.loads(out)["codim"], 3)

    def test_malformed_file(self):
        """Files that are not JSON exit with the input code"""
        path = self.dir / "broken.json"
        path.write_text("{not json", encoding="utf-8")
        code, _, err = run(["pv", "check", str(path)])
        self.assertEqual(code, cli.EXIT_INPUT)
        self.assertIn("[input error]", err)

    def test_solve(self):
        """The solved configuration is printed and written"""
        output = self.dir / "solved.json"
        code, out, _ = run(["pv", "solve", "rotating-pair", "--output", str(output)])
        self.assertEqual(code, cli.EXIT_OK)
        self.assertEqual(sorted(json.loads(out)), ["im_zeta2", "re_zeta1", "re_zeta2"])
        self.assertEqual(load_configuration(output).M, 2)


class TestHollowVortexCommands(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_inadmissible_radius(self):
        """Overlapping circles exit with the domain code"""
        code, _, err = run(["hv", "desingularize", "rotating-pair", "--rho", "1.5", "--N", "16"])
        self.assertEqual(code, cli.EXIT_DOMAIN)
        self.assertIn("[domain error]", err)

    def test_missing_branch(self):
        """Exporting a missing branch file exits with the input code"""
        code, _, _ = run(["hv", "export", str(self.dir / "missing.jsonl")])
        self.assertEqual(code, cli.EXIT_INPUT)

    def test_desingularize_diagnose_export(self):
        """A single-radius solve is stored, diagnosed and exported"""
        branch = self.dir / "pair.jsonl"
        code, out, _ = run(
            ["hv", "desingularize", "translating-pair", "--rho", "0.05", "--N", "16", "--output", str(branch)]
        )
        self.assertEqual(code, cli.EXIT_OK)
        self.assertEqual(json.loads(out)["rho"], 0.05)
        self.assertEqual(len(read_branch(branch).points), 1)

        code, out, _ = run(["hv", "diagnose", str(branch), "--compact"])
        self.assertEqual(code, cli.EXIT_OK)
        self.assertIn("n_conf", json.loads(out.splitlines()[0]))

        code, _, _ = run(["hv", "export", str(branch), "--output-dir", str(self.dir / "csv")])
        self.assertEqual(code, cli.EXIT_OK)
        self.assertTrue((self.dir / "csv" / "pair_boundaries.csv").exists())
        self.assertTrue((self.dir / "csv" / "pair_branch.csv").exists())

    def test_existing_output(self):
        """A single-radius solve does not overwrite a branch file"""
        branch = self.dir / "taken.jsonl"
        branch.write_text("{}\n", encoding="utf-8")
        code, _, _ = run(["hv", "desingularize", "translating-pair", "--rho", "0.05", "--output", str(branch)])
        self.assertEqual(code, cli.EXIT_INPUT)

    def test_resume_needs_output(self):
        """Resuming without a branch file is an input error"""
        code, _, _ = run(["hv", "continue", "--resume"])
        self.assertEqual(code, cli.EXIT_INPUT)

    def test_diagnose_failing_gates(self):
        """Diagnosing a point that fails a gate exits with the invariant code"""
        branch = self.dir / "guess.jsonl"
        scenario = load_scenario("translating-pair")
        u = leading_guess(scenario, 0.1, 16)
        with BranchWriter(branch, branch_header(None, scenario)) as writer:
            writer.write_point(BranchPoint(u, diagnose(u, compute_L=False), 0.0))
        code, out, _ = run(["hv", "diagnose", str(branch)])
        self.assertEqual(code, cli.EXIT_INVARIANT)
        self.assertIn("failed gates", out)
