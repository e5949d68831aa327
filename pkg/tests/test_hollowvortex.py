"""
Tests for the hollowvortex module
"""

import unittest

import numpy as np

from vortexforge import hollowvortex
from vortexforge.configurations import load_builtin
from vortexforge.exceptions import DomainError, InputError, PreconditionError, UnphysicalStateError
from vortexforge.hollowvortex import HollowState
from vortexforge.spectral import DensityVector


class TestTrivialState(unittest.TestCase):
    """
    The state (0, 0, 0, λ₀) over every packaged configuration
    """

    def setUp(self, name=None):
        if name is None:
            self.skipTest("Abstract test class")
        self.cfg = load_builtin(name)
        self.N = 16

    def test_solves_at_zero_radius(self):
        """The trivial state solves the problem at ρ = 0"""
        u = HollowState.trivial(self.cfg, self.N)
        self.assertLess(hollowvortex.residual(u).sup(), 1e-14)

    def test_circles_at_positive_radius(self):
        """Without densities the boundaries are the circles themselves"""
        u = HollowState.trivial(self.cfg, self.N, rho=0.1)
        fields = hollowvortex.assemble_flow(u)
        radii = np.abs(fields.boundary_points() - self.cfg.centers[:, None])
        np.testing.assert_allclose(radii, 0.1, atol=1e-14)

    def test_circulation(self):
        """Contour integrals of w_ζ return the circulations"""
        for rho in (0.0, 0.1):
            u = HollowState.trivial(self.cfg, self.N, rho=rho)
            for k in range(self.cfg.M):
                with self.subTest(rho=rho, k=k):
                    self.assertAlmostEqual(hollowvortex.circulation(u, k), self.cfg.circulations[k], places=10)

    def test_series(self):
        """The boundary velocity of the point vortices matches its power series"""
        for k in range(self.cfg.M):
            with self.subTest(k=k):
                direct = hollowvortex.eval_Vrho(0.1, self.cfg, k)
                series = hollowvortex.vrho_series(0.1, self.cfg, k)
                np.testing.assert_allclose(direct.values, series.values, atol=1e-12)

    def test_linearization(self):
        """At ρ = 0 the residual is the linearization applied to (μ, ν, Q)"""
        rng = np.random.default_rng(17)
        u = hollowvortex.random_state(self.cfg, self.N, 0.0, 0.1, rng)
        lin = hollowvortex.linearized_trivial(self.cfg, self.N)
        A, B = lin.apply(u.mu, u.nu, u.Q, np.zeros(len(self.cfg.split)))
        res = hollowvortex.residual(u)
        np.testing.assert_allclose(res.kinematic_coeffs(self.N), A, atol=1e-12)
        np.testing.assert_allclose(res.bernoulli_coeffs(self.N), B, atol=1e-12)

    def test_linearization_in_lambda(self):
        """The λ blocks match central differences of the residual"""
        lin = hollowvortex.linearized_trivial(self.cfg, self.N)
        zeros = DensityVector.zeros(self.cfg.M, self.N)
        base = HollowState.trivial(self.cfg, self.N)
        h = 1e-5
        for i in range(len(self.cfg.split)):
            with self.subTest(i=i):
                direction = np.zeros(len(self.cfg.split))
                direction[i] = 1.0
                plus = hollowvortex.residual(base.replace(lam=base.lam + h * direction))
                minus = hollowvortex.residual(base.replace(lam=base.lam - h * direction))
                A, B = lin.apply(zeros, zeros, np.zeros(self.cfg.M), direction)
                np.testing.assert_allclose(
                    (plus.kinematic_coeffs(self.N) - minus.kinematic_coeffs(self.N)) / (2.0 * h), A, atol=1e-7
                )
                np.testing.assert_allclose(
                    (plus.bernoulli_coeffs(self.N) - minus.bernoulli_coeffs(self.N)) / (2.0 * h), B, atol=1e-7
                )


class TestTrivialRotatingPair(TestTrivialState):
    def setUp(self):
        super().setUp("rotating-pair")


class TestTrivialTripole(TestTrivialState):
    def setUp(self):
        super().setUp("tripole")


class TestTrivialTranslatingPair(TestTrivialState):
    def setUp(self):
        super().setUp("translating-pair")


class TestRandomState(unittest.TestCase):
    def setUp(self):
        self.cfg = load_builtin("rotating-pair")
        self.rng = np.random.default_rng(23)
        self.u = hollowvortex.random_state(self.cfg, 16, 0.1, 0.01, self.rng)

    def test_reflection(self):
        """The reflected state gives the same flow with an odd residual"""
        reflected = hollowvortex.reflect_state(self.u)
        self.assertEqual(reflected.rho, -0.1)
        res = hollowvortex.residual(self.u)
        res_reflected = hollowvortex.residual(reflected)
        half = self.u.n_nodes // 2
        np.testing.assert_allclose(np.roll(res_reflected.A, half, axis=1), -res.A, atol=1e-12)
        np.testing.assert_allclose(np.roll(res_reflected.B, half, axis=1), -res.B, atol=1e-12)

    def test_reflection_boundaries(self):
        """The reflected state has the same boundary curves"""
        points = hollowvortex.assemble_flow(self.u).boundary_points()
        reflected = hollowvortex.assemble_flow(hollowvortex.reflect_state(self.u)).boundary_points()
        np.testing.assert_allclose(np.roll(reflected, self.u.n_nodes // 2, axis=1), points, atol=1e-13)

    def test_identity_holds_off_solution(self):
        """The rotation identity vanishes on the residual of any state"""
        res = hollowvortex.residual(self.u)
        value = hollowvortex.hv_phi("r", res.A, res.B, self.u)
        self.assertLess(abs(value), 1e-10)

    def test_identity_kind(self):
        """Identity kinds must match the frame"""
        self.assertEqual(hollowvortex.phi_kind(self.u), "r")
        res = hollowvortex.residual(self.u)
        with self.assertRaises(PreconditionError):
            hollowvortex.hv_phi("t", res.A, res.B, self.u)
        with self.assertRaises(PreconditionError):
            hollowvortex.hv_phi("s", res.A, res.B, self.u)

    def test_circulation_unchanged(self):
        """Densities do not change the circulations"""
        for k in range(2):
            self.assertAlmostEqual(hollowvortex.circulation(self.u, k), 1.0, places=9)

    def test_far_field_matches_multipole(self):
        """The far-field coefficient of f − ζ is the first multipole"""
        fields = hollowvortex.assemble_flow(self.u)
        f_coeff, _ = fields.far_field(0)
        self.assertAlmostEqual(f_coeff, -(0.1**3) * np.conj(self.u.mu.coeffs[0, 0]), places=15)

    def test_round_trip(self):
        """to_dict and from_dict preserve the state"""
        restored = HollowState.from_dict(self.u.to_dict())
        np.testing.assert_array_equal(restored.mu.coeffs, self.u.mu.coeffs)
        np.testing.assert_array_equal(restored.nu.coeffs, self.u.nu.coeffs)
        np.testing.assert_array_equal(restored.Q, self.u.Q)
        np.testing.assert_array_equal(restored.lam, self.u.lam)
        self.assertEqual(restored.rho, self.u.rho)
        self.assertEqual(restored.n_nodes, self.u.n_nodes)
        self.assertEqual(restored.cfg_base, self.u.cfg_base)


class TestStateValidation(unittest.TestCase):
    def setUp(self):
        self.cfg = load_builtin("rotating-pair")

    def test_boundary_speed(self):
        """q_k follows from the Bernoulli constant"""
        u = HollowState.trivial(self.cfg, 16, rho=0.1)
        self.assertAlmostEqual(hollowvortex.q_from_state(u, 0), 1.0 / (2.0 * np.pi * 0.1), places=12)

    def test_unphysical_speed(self):
        """A too negative Bernoulli constant has no real boundary speed"""
        u = HollowState.trivial(self.cfg, 16, rho=0.1).replace(Q=np.array([-1.0, -1.0]))
        with self.assertRaises(UnphysicalStateError):
            hollowvortex.q_from_state(u, 0)

    def test_speed_at_zero_radius(self):
        """Boundary speeds are undefined at ρ = 0"""
        with self.assertRaises(DomainError):
            hollowvortex.q_from_state(HollowState.trivial(self.cfg, 16), 0)

    def test_wrong_sizes(self):
        """Bernoulli constants and λ must match the configuration"""
        zeros = DensityVector.zeros(2, 16)
        with self.assertRaises(InputError):
            HollowState(zeros, zeros, np.zeros(3), self.cfg.varying_values(), 0.1, self.cfg)
        with self.assertRaises(InputError):
            HollowState(zeros, zeros, np.zeros(2), np.zeros(1), 0.1, self.cfg)

    def test_coarse_grid(self):
        """The grid must resolve the Bernoulli modes"""
        with self.assertRaises(DomainError):
            HollowState.trivial(self.cfg, 16, n_nodes=34)

    def test_needs_split(self):
        """States are built on a configuration with a split"""
        with self.assertRaises(PreconditionError):
            HollowState.trivial(self.cfg.with_split(None), 16)

    def test_inadmissible_radius(self):
        """Touching circles are refused"""
        u = HollowState.trivial(self.cfg, 16, rho=1.0)
        with self.assertRaises(DomainError):
            hollowvortex.residual(u)

    def test_malformed_dict(self):
        """Incomplete state objects are input errors"""
        with self.assertRaises(InputError):
            HollowState.from_dict({"rho": 0.1})
