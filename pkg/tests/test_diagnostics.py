"""
Tests for the diagnostics module
"""

import dataclasses
import unittest

import numpy as np

from vortexforge import diagnostics
from vortexforge.configurations import load_builtin, load_scenario
from vortexforge.desingularize import leading_guess, newton_solve
from vortexforge.diagnostics import DiagnosticsReport, GateTolerances
from vortexforge.exceptions import DomainError, PreconditionError
from vortexforge.hollowvortex import HollowState, assemble_flow, random_state
from vortexforge.pointvortex import VortexConfiguration

RHO = 0.1


class TestCircles(unittest.TestCase):
    """
    Geometry of the trivial state, whose boundaries are exact circles
    """

    def setUp(self):
        self.cfg = load_builtin("rotating-pair")
        self.u = HollowState.trivial(self.cfg, 16, rho=RHO)
        self.fields = assemble_flow(self.u)

    def test_geometry(self):
        """Perimeters, areas and moment of inertia of two circles"""
        geometry = diagnostics.boundary_geometry(self.fields)
        np.testing.assert_allclose(geometry.perimeters, 2.0 * np.pi * RHO, rtol=1e-13)
        np.testing.assert_allclose(geometry.areas, np.pi * RHO**2, rtol=1e-13)
        self.assertAlmostEqual(geometry.vacuum_area, 2.0 * np.pi * RHO**2, places=14)
        expected_inertia = 2.0 * (np.pi * RHO**2 + np.pi * RHO**4 / 2.0)
        self.assertAlmostEqual(geometry.moment_inertia, expected_inertia, places=13)

    def test_non_circularity(self):
        """Circles have zero non-circularity"""
        self.assertLess(diagnostics.non_circularity(self.fields), 1e-13)

    def test_conformal_norm(self):
        """|f_ζ| = 1, unit chord-arc constant and a gap of 2 − 2ρ"""
        self.assertAlmostEqual(diagnostics.chord_arc(self.fields), 1.0, places=12)
        self.assertAlmostEqual(diagnostics.boundary_gap(self.fields), 2.0 - 2.0 * RHO, places=12)
        self.assertAlmostEqual(diagnostics.n_conf(self.fields), 2.0 + 1.0 / (2.0 - 2.0 * RHO), places=10)

    def test_winding(self):
        """Circles pass the winding, injectivity and exterior checks"""
        checks = diagnostics.winding_injectivity(self.fields)
        self.assertTrue(checks.winding_ok)
        self.assertTrue(checks.boundary_injective)
        self.assertTrue(checks.mutually_exterior)
        self.assertLess(abs(checks.winding_value), 1e-12)

    def test_boundary_curves(self):
        """One curve and one speed row per vortex"""
        theta, points, speed = diagnostics.boundary_curves(self.fields)
        self.assertEqual(theta.shape, (self.u.n_nodes,))
        self.assertEqual(points.shape, (2, self.u.n_nodes))
        self.assertEqual(speed.shape, (2, self.u.n_nodes))
        self.assertTrue(np.all(speed > 0.0))

    def test_velocity_norm(self):
        """The velocity norm is at least 2"""
        self.assertGreaterEqual(diagnostics.n_vel(self.fields), 2.0)

    def test_zero_radius(self):
        """Diagnostics need ρ ≠ 0"""
        with self.assertRaises(DomainError):
            diagnostics.diagnose(HollowState.trivial(self.cfg, 16))


class TestTranslatingCircles(unittest.TestCase):
    def setUp(self):
        self.cfg = load_builtin("translating-pair")
        self.fields = assemble_flow(HollowState.trivial(self.cfg, 16, rho=RHO))

    def test_speed_identity(self):
        """Without rotation q_k|Γ_k| = |γ_k| for circles"""
        for k in range(2):
            self.assertLess(diagnostics.speed_identity_residual(self.fields, k), 1e-13)

    def test_wave_speed_margin(self):
        """The wave-speed bound holds"""
        self.assertGreater(diagnostics.wave_speed_check(self.fields), 0.0)


class TestSmallRadiusLimit(unittest.TestCase):
    def test_errors_decrease(self):
        """The boundary integrals approach their point-vortex limits as ρ → 0"""
        cfg = VortexConfiguration([1.0, 0.5, -0.7], [0.0, 2.0, 1.0 + 1.5j], 0.0, 0.1)
        table = diagnostics.appendix_limit_check(cfg)
        self.assertEqual(len(table), 3)
        for column in ("plain_error", "weighted_error"):
            errors = table[column].to_numpy()
            self.assertLess(errors[-1], errors[0])


class TestReport(unittest.TestCase):
    def setUp(self):
        cfg = load_builtin("translating-pair")
        self.u = random_state(cfg, 16, RHO, 0.001, np.random.default_rng(29))
        self.report = diagnostics.diagnose(self.u, compute_L=False)

    def test_round_trip(self):
        """to_dict and from_dict preserve the report"""
        self.assertEqual(DiagnosticsReport.from_dict(self.report.to_dict()), self.report)

    def test_fields(self):
        """One entry per vortex and no angular momentum when not requested"""
        self.assertIsNone(self.report.excess_L)
        self.assertIsNone(self.report.momentum_resid)
        self.assertEqual(len(self.report.circulations), 2)
        self.assertLess(max(self.report.circulation_defects), 1e-9)

    def test_identity_residual(self):
        """The translation identity holds on the residual of any state"""
        self.assertLess(self.report.phi_resid, 1e-10)

    def test_gate_failures(self):
        """Failed checks are reported by gate name"""
        broken = dataclasses.replace(self.report, winding_ok=False, phi_resid=1.0, speed_spread=[1.0, 0.0])
        failures = broken.gate_failures()
        self.assertIn("winding", failures)
        self.assertIn("phi", failures)
        self.assertIn("speed_spread", failures)
        self.assertFalse(broken.gates_ok())

    def test_tolerances(self):
        """Loose tolerances accept what strict ones reject"""
        strict = GateTolerances(speed_spread=1e-300)
        loose = GateTolerances.from_dict({key: 1e10 for key in GateTolerances().to_dict()})
        self.assertIn("speed_spread", self.report.gate_failures(strict))
        self.assertTrue(self.report.gates_ok(loose))

    def test_tolerance_defaults(self):
        """Missing tolerances take their defaults"""
        self.assertEqual(GateTolerances.from_dict(None), GateTolerances())
        self.assertEqual(GateTolerances.from_dict({"phi": 1e-6}).phi, 1e-6)


class TestMomentumIdentity(unittest.TestCase):
    """
    The momentum identity on converged rotating pairs
    """

    def test_rotating_pair(self):
        """The identity holds to quadrature accuracy at small and moderate radii"""
        scenario = load_scenario("rotating-pair")
        for rho in (0.05, 0.2):
            with self.subTest(rho=rho):
                u = newton_solve(leading_guess(scenario, rho, 32), scenario)
                report = diagnostics.diagnose(u, compute_momentum=True)
                self.assertIsNotNone(report.excess_L)
                self.assertLess(report.momentum_resid, 1e-6)

    def test_needs_rotation(self):
        """The identity is refused for translating states"""
        u = HollowState.trivial(load_builtin("translating-pair"), 16, rho=RHO)
        with self.assertRaises(PreconditionError):
            diagnostics.momentum_identity_residual(assemble_flow(u))
