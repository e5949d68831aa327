"""
Tests for the persistence module
"""

import json
import tempfile
import unittest
from pathlib import Path

import numpy as np
import pandas as pd

from vortexforge import api
from vortexforge.configurations import load_scenario
from vortexforge.desingularize import BranchPoint, BranchResult, TerminationReason, leading_guess, newton_solve
from vortexforge.diagnostics import GateTolerances, diagnose
from vortexforge.exceptions import InputError, InvariantViolation
from vortexforge.persistence import (
    BranchWriter,
    RunConfig,
    boundary_table,
    branch_header,
    branch_table,
    dumps,
    export_boundaries,
    export_branch_table,
    read_branch,
)
from vortexforge.spectral import DensityVector

RHO = 0.1


def make_points(scenario, rhos=(0.05, 0.1)):
    points = []
    for number, rho in enumerate(rhos):
        u = leading_guess(scenario, rho, 16)
        points.append(BranchPoint(u, diagnose(u, compute_L=False), 0.05 * number, step=0.05))
    return points


class TestRunConfig(unittest.TestCase):
    def test_defaults(self):
        """The default run is valid"""
        run_config = RunConfig()
        self.assertEqual(run_config.N, 64)
        self.assertEqual(run_config.output_dir, Path("."))

    def test_round_trip(self):
        """to_dict and from_dict preserve the settings"""
        run_config = RunConfig(scenario="tripole", N=32, rho_max=0.3, max_steps=7)
        self.assertEqual(RunConfig.from_dict(run_config.to_dict()), run_config)

    def test_from_file(self):
        """Run settings are read from JSON files"""
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "run.json"
            path.write_text(json.dumps({"scenario": "translating-pair", "N": 24, "step": 0.02}), encoding="utf-8")
            run_config = RunConfig.from_file(path)
        self.assertEqual(run_config.scenario, "translating-pair")
        self.assertEqual(run_config.N, 24)
        self.assertEqual(run_config.step, 0.02)

    def test_invalid(self):
        """Invalid settings are input errors"""
        for data in (
            {"N": 8},
            {"rho_start": 0.5, "rho_max": 0.5},
            {"n_nodes": 40},
            {"step": 0.0},
            {"max_steps": 0},
            {"precision": "double"},
            {"gates": {"phi": -1.0}},
            {"newton": {"residual_tol": 0.0}},
            {"N": "many"},
        ):
            with self.subTest(data=data):
                with self.assertRaises(InputError):
                    RunConfig.from_dict(data)

    def test_missing_file(self):
        """Missing and malformed files are input errors"""
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(InputError):
                RunConfig.from_file(Path(tmp) / "missing.json")
            path = Path(tmp) / "broken.json"
            path.write_text("{not json", encoding="utf-8")
            with self.assertRaises(InputError):
                RunConfig.from_file(path)


class TestBranchFile(unittest.TestCase):
    def setUp(self):
        self.scenario = load_scenario("translating-pair")
        self.points = make_points(self.scenario)
        self.run_config = RunConfig(scenario="translating-pair", N=16, rho_start=0.05, rho_max=0.1)
        self.tmp = tempfile.TemporaryDirectory()
        self.path = Path(self.tmp.name) / "branch.jsonl"

    def tearDown(self):
        self.tmp.cleanup()

    def write(self, terminate=True):
        with BranchWriter(self.path, branch_header(self.run_config, self.scenario)) as writer:
            for point in self.points:
                writer.write_point(point)
            if terminate:
                writer.write_termination(BranchResult(self.points, TerminationReason.RHO_LIMIT, [], ""))

    def test_round_trip(self):
        """Stored points are read back unchanged"""
        self.write()
        branch = read_branch(self.path)
        self.assertTrue(branch.finished)
        self.assertEqual(branch.termination["reason"], "rho_limit")
        self.assertEqual(branch.termination["points"], 2)
        self.assertEqual(branch.run_config, self.run_config)
        self.assertIs(branch.scenario.kind, self.scenario.kind)
        self.assertEqual(len(branch.points), 2)
        for stored, point in zip(branch.points, self.points):
            self.assertEqual(stored.arclength, point.arclength)
            self.assertEqual(stored.step, point.step)
            self.assertEqual(stored.state.rho, point.state.rho)
            np.testing.assert_array_equal(stored.state.mu.coeffs, point.state.mu.coeffs)
            np.testing.assert_array_equal(stored.state.lam, point.state.lam)
            self.assertEqual(stored.diagnostics.phi_resid, point.diagnostics.phi_resid)

    def test_one_record_per_line(self):
        """Header, points and termination are single JSON lines"""
        self.write()
        lines = self.path.read_text(encoding="utf-8").splitlines()
        self.assertEqual([json.loads(line)["type"] for line in lines], ["header", "point", "point", "termination"])

    def test_append(self):
        """Reopening a file appends without a second header"""
        self.write(terminate=False)
        with BranchWriter(self.path) as writer:
            writer.write_termination(BranchResult(self.points, TerminationReason.MAX_STEPS, [], "stopped"))
        branch = read_branch(self.path)
        self.assertEqual(len(branch.points), 2)
        self.assertEqual(branch.termination["note"], "stopped")

    def test_new_file_needs_header(self):
        """A new file cannot be started without a header"""
        with self.assertRaises(InputError):
            BranchWriter(self.path).open()

    def test_partial_line(self):
        """An interrupted write is ignored and cut on repair"""
        self.write(terminate=False)
        size = self.path.stat().st_size
        with open(self.path, "a", encoding="utf-8") as fl:
            fl.write('{"type": "point", "state": {"rh')
        branch = read_branch(self.path)
        self.assertEqual(len(branch.points), 2)
        self.assertFalse(branch.finished)
        self.assertGreater(self.path.stat().st_size, size)
        read_branch(self.path, repair=True)
        self.assertEqual(self.path.stat().st_size, size)

    def test_corrupt_line(self):
        """A terminated line that is not JSON is an input error"""
        self.write(terminate=False)
        with open(self.path, "a", encoding="utf-8") as fl:
            fl.write("{broken\n")
        with self.assertRaises(InputError):
            read_branch(self.path)

    def test_missing_header(self):
        """A file must start with its header"""
        self.path.write_text(dumps({"type": "point", **self.points[0].to_dict()}) + "\n", encoding="utf-8")
        with self.assertRaises(InputError):
            read_branch(self.path)

    def test_record_after_termination(self):
        """Nothing may follow the termination record"""
        self.write()
        with open(self.path, "a", encoding="utf-8") as fl:
            fl.write(dumps({"type": "point", **self.points[0].to_dict()}) + "\n")
        with self.assertRaises(InputError):
            read_branch(self.path)

    def test_unknown_record(self):
        """Unknown record types are input errors"""
        self.write(terminate=False)
        with open(self.path, "a", encoding="utf-8") as fl:
            fl.write(dumps({"type": "comment"}) + "\n")
        with self.assertRaises(InputError):
            read_branch(self.path)

    def test_single_point_header(self):
        """Single-point files carry no run configuration"""
        header = branch_header(None, self.scenario)
        self.assertIsNone(header["run_config"])
        with BranchWriter(self.path, header) as writer:
            writer.write_point(self.points[0])
        branch = read_branch(self.path)
        self.assertIsNone(branch.run_config)
        self.assertFalse(branch.finished)

    def test_missing_file(self):
        """Reading a missing file is an input error"""
        with self.assertRaises(InputError):
            read_branch(Path(self.tmp.name) / "missing.jsonl")


class TestTables(unittest.TestCase):
    def setUp(self):
        self.scenario = load_scenario("translating-pair")
        self.points = make_points(self.scenario)

    def test_boundary_table(self):
        """One row per vortex and quadrature node of every state"""
        states = [point.state for point in self.points]
        table = boundary_table(states)
        n_nodes = states[0].n_nodes
        self.assertEqual(len(table), 2 * 2 * n_nodes)
        self.assertEqual(list(table.columns), ["point", "rho", "vortex_index", "theta", "re_z", "im_z", "speed"])
        self.assertEqual(sorted(table["point"].unique()), [0, 1])
        self.assertTrue((table["speed"] > 0.0).all())

    def test_circles(self):
        """States without densities have circular boundaries"""
        u = leading_guess(self.scenario, RHO, 16)
        zeros = DensityVector.zeros(u.M, u.N)
        u = u.replace(mu=zeros, nu=zeros)
        table = boundary_table([u])
        centers = u.config.centers[table["vortex_index"].to_numpy()]
        radii = np.abs(table["re_z"].to_numpy() + 1j * table["im_z"].to_numpy() - centers)
        np.testing.assert_allclose(radii, RHO, atol=1e-14)

    def test_empty_boundary_table(self):
        """No states give an empty table with the usual columns"""
        self.assertEqual(len(boundary_table([])), 0)
        self.assertIn("speed", boundary_table([]).columns)

    def test_branch_table(self):
        """One row per point with the varying parameters and the monitors"""
        table = branch_table(self.points)
        self.assertEqual(len(table), 2)
        for column in ("rho", "arclength", "c", "Q1", "Q2", "n_conf", "n_vel", "gates_ok"):
            self.assertIn(column, table.columns)
        self.assertTrue(table["excess_L"].isna().all())
        np.testing.assert_allclose(table["rho"], [0.05, 0.1])

    def test_export(self):
        """CSV exports are read back by pandas"""
        with tempfile.TemporaryDirectory() as tmp:
            boundaries = export_boundaries([point.state for point in self.points], Path(tmp) / "boundaries.csv")
            table = export_branch_table(self.points, Path(tmp) / "branch.csv")
            stored_boundaries = pd.read_csv(Path(tmp) / "boundaries.csv")
            stored_table = pd.read_csv(Path(tmp) / "branch.csv")
        self.assertEqual(len(stored_boundaries), len(boundaries))
        self.assertEqual(list(stored_table.columns), list(table.columns))
        np.testing.assert_array_equal(stored_boundaries["re_z"].to_numpy(), boundaries["re_z"].to_numpy())


class TestBranchRuns(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)
        self.run_config = RunConfig(
            scenario="translating-pair", N=16, rho_start=0.02, rho_max=0.06, step=0.02, max_steps=10
        )

    def tearDown(self):
        self.tmp.cleanup()

    def test_identical_runs(self):
        """Identical run settings write byte-identical branch files"""
        first, second = self.dir / "first.jsonl", self.dir / "second.jsonl"
        api.continue_branch_to_file(self.run_config, first)
        api.continue_branch_to_file(self.run_config, second)
        self.assertEqual(first.read_bytes(), second.read_bytes())

    def test_resume_after_partial_line(self):
        """An interrupted file is completed to the uninterrupted one"""
        full = self.dir / "full.jsonl"
        api.continue_branch_to_file(self.run_config, full)
        lines = full.read_bytes().splitlines(keepends=True)
        self.assertGreater(len(lines), 4)
        interrupted = self.dir / "interrupted.jsonl"
        interrupted.write_bytes(b"".join(lines[:3]) + lines[3][: len(lines[3]) // 2])
        api.continue_branch_to_file(None, interrupted, resume=True)
        self.assertEqual(interrupted.read_bytes(), full.read_bytes())

    def test_failing_point_is_stored(self):
        """A single-radius solve failing a gate is kept with accepted false"""
        path = self.dir / "rejected.jsonl"
        with self.assertRaises(InvariantViolation):
            api.desingularize("translating-pair", 0.05, N=16, tolerances=GateTolerances(phi=0.0), output_path=path)
        points = read_branch(path).points
        self.assertEqual(len(points), 1)
        self.assertFalse(points[0].accepted)
        self.assertFalse(branch_table(points)["accepted"].iloc[0])


class TestBoundarySymmetry(unittest.TestCase):
    def test_mirror_symmetric(self):
        """Exported boundaries are even across both axes"""
        mirrors = (np.conj, lambda z: -np.conj(z))
        with tempfile.TemporaryDirectory() as tmp:
            for name in ("rotating-pair", "tripole", "translating-pair"):
                scenario = load_scenario(name)
                u = newton_solve(leading_guess(scenario, RHO, 16), scenario)
                path = Path(tmp) / f"{name}.csv"
                export_boundaries([u], path)
                table = pd.read_csv(path)
                z = table["re_z"].to_numpy() + 1j * table["im_z"].to_numpy()
                for mirror in mirrors:
                    with self.subTest(name=name, mirror=mirror):
                        defect = np.abs(mirror(z)[:, None] - z[None, :]).min(axis=1).max()
                        self.assertLess(defect, 1e-10)
