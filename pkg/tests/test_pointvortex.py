"""
Tests for the point-vortex module and the packaged configurations
"""

import unittest

import numpy as np

from vortexforge import pointvortex
from vortexforge.configurations import available, load_builtin, load_configuration
from vortexforge.exceptions import CollisionError, InputError, PreconditionError
from vortexforge.pointvortex import (
    ParameterSplit,
    SteadyKind,
    VortexConfiguration,
    coordinate_names,
)

ROTATING_OMEGA = 1.0 / (4.0 * np.pi)


def random_configuration(rng, M):
    centers = 3.0 * (rng.standard_normal(M) + 1j * rng.standard_normal(M))
    return VortexConfiguration(rng.standard_normal(M), centers, rng.standard_normal(), rng.standard_normal())


class TestBuiltinConfiguration(unittest.TestCase):
    """
    Properties shared by every packaged configuration
    """

    def setUp(self, name=None, kind=None, codim=None):
        if name is None:
            self.skipTest("Abstract test class")
        self.name = name
        self.kind = kind
        self.codim = codim
        self.cfg = load_builtin(name)

    def test_listed(self):
        """The configuration is listed in the index"""
        self.assertIn(self.name, available())

    def test_steady(self):
        """The residual vanishes to rounding"""
        self.assertLess(np.max(np.abs(pointvortex.eval_pv_residual(self.cfg))), 1e-14)
        self.assertTrue(pointvortex.is_steady(self.cfg))

    def test_kind(self):
        """The frame kind follows from c and Ω"""
        self.assertIs(pointvortex.steady_kind(self.cfg), self.kind)

    def test_classification(self):
        """The packaged split is non-degenerate with the expected codimension"""
        steady = pointvortex.classify_nondegeneracy(self.cfg)
        self.assertEqual(steady.codim, self.codim)
        self.assertEqual(steady.rank, 2 * self.cfg.M - self.codim)
        self.assertTrue(steady.nondegenerate)
        self.assertFalse(steady.ambiguous)

    def test_jacobian_finite_differences(self):
        """The analytic Jacobian matches central differences"""
        coordinates = self.cfg.coordinates()
        h = 1e-6
        expected = np.empty((2 * self.cfg.M, coordinates.size))
        for i in range(coordinates.size):
            plus, minus = coordinates.copy(), coordinates.copy()
            plus[i] += h
            minus[i] -= h
            v_plus = pointvortex.eval_pv_residual(VortexConfiguration.from_coordinates(plus, self.cfg.M))
            v_minus = pointvortex.eval_pv_residual(VortexConfiguration.from_coordinates(minus, self.cfg.M))
            diff = (v_plus - v_minus) / (2.0 * h)
            expected[0::2, i] = diff.real
            expected[1::2, i] = diff.imag
        np.testing.assert_allclose(pointvortex.full_jacobian(self.cfg), expected, atol=1e-6)

    def test_identity_functional_annihilates_range(self):
        """The identity functionals vanish on the range of the Jacobian"""
        functional = pointvortex.identity_functional(self.cfg)
        jacobian = pointvortex.pv_jacobian(self.cfg)
        self.assertEqual(functional.shape[0], self.codim)
        np.testing.assert_allclose(functional @ jacobian, 0.0, atol=1e-12)

    def test_solve_from_steady(self):
        """A steady seed is returned unchanged"""
        solved = pointvortex.solve_steady_pv(self.cfg)
        np.testing.assert_allclose(solved.coordinates(), self.cfg.coordinates(), atol=1e-12)


class TestRotatingPair(TestBuiltinConfiguration):
    def setUp(self):
        super().setUp("rotating-pair", SteadyKind.ROTATING, 1)

    def test_jacobian_entries(self):
        """Jacobian with respect to (Re ζ₁, Re ζ₂, Im ζ₂)"""
        expected = np.array([[0.0, 0.0, 1.0], [3.0, -1.0, 0.0], [0.0, 0.0, 1.0], [-1.0, 3.0, 0.0]]) / (8.0 * np.pi)
        np.testing.assert_allclose(pointvortex.pv_jacobian(self.cfg), expected, atol=1e-14)

    def test_solve_perturbed(self):
        """Newton recovers the pair from a shifted first vortex"""
        seed = self.cfg.with_coordinates([1.05, -0.9, 0.1], self.cfg.split.indices)
        solved = pointvortex.solve_steady_pv(seed)
        np.testing.assert_allclose(solved.centers, [1.0, -1.0], atol=1e-10)
        self.assertTrue(pointvortex.is_steady(solved))

    def test_invariants(self):
        """Hamiltonian and impulses of the pair"""
        hamiltonian, impulse, angular = pointvortex.pv_invariants(self.cfg)
        self.assertAlmostEqual(hamiltonian, -np.log(4.0) / (4.0 * np.pi), places=14)
        self.assertAlmostEqual(abs(impulse), 0.0, places=14)
        self.assertAlmostEqual(angular, 2.0, places=14)

    def test_dynamics_conserve_invariants(self):
        """Runge–Kutta integration conserves the impulses and the Hamiltonian"""
        trajectory = pointvortex.advance_dynamics(self.cfg, 0.01, 200)
        self.assertEqual(trajectory.shape, (201, 2))
        start = pointvortex.pv_invariants(self.cfg)
        end = pointvortex.pv_invariants(VortexConfiguration(self.cfg.circulations, trajectory[-1]))
        self.assertAlmostEqual(abs(end[1] - start[1]), 0.0, places=13)
        self.assertAlmostEqual(end[0], start[0], places=8)
        self.assertAlmostEqual(end[2], start[2], places=8)

    def test_dynamics_rotate_rigidly(self):
        """The pair rotates at the angular velocity of its steady frame"""
        t = 1.0
        trajectory = pointvortex.advance_dynamics(self.cfg, 0.01, 100)
        np.testing.assert_allclose(np.abs(trajectory[-1]), [1.0, 1.0], atol=1e-10)
        angle = np.angle(trajectory[-1][0])
        self.assertAlmostEqual(abs(angle), ROTATING_OMEGA * t, places=8)

    def test_collision(self):
        """Integration stops when the separation drops below the threshold"""
        with self.assertRaises(CollisionError) as context:
            pointvortex.advance_dynamics(self.cfg, 0.01, 10, min_separation=3.0)
        self.assertEqual(context.exception.trajectory.shape, (2, 2))


class TestStationaryTripole(TestBuiltinConfiguration):
    def setUp(self):
        super().setUp("tripole", SteadyKind.STATIONARY, 3)

    def test_dynamics_stay_put(self):
        """A stationary configuration does not move"""
        trajectory = pointvortex.advance_dynamics(self.cfg, 0.05, 20)
        np.testing.assert_allclose(trajectory[-1], self.cfg.centers, atol=1e-14)


class TestTranslatingPair(TestBuiltinConfiguration):
    def setUp(self):
        super().setUp("translating-pair", SteadyKind.TRANSLATING, 1)

    def test_dynamics_translate(self):
        """Both vortices move with the wave speed"""
        trajectory = pointvortex.advance_dynamics(self.cfg, 0.1, 10)
        displacement = np.conj(trajectory[-1] - trajectory[0])
        np.testing.assert_allclose(displacement, [self.cfg.wave_speed] * 2, atol=1e-12)


class TestCoordinates(unittest.TestCase):
    def test_names(self):
        """Coordinate names follow the storage order"""
        self.assertEqual(
            coordinate_names(2),
            ["gamma1", "gamma2", "re_zeta1", "im_zeta1", "re_zeta2", "im_zeta2", "c", "omega"],
        )

    def test_round_trip(self):
        """from_coordinates inverts coordinates"""
        cfg = random_configuration(np.random.default_rng(0), 4)
        restored = VortexConfiguration.from_coordinates(cfg.coordinates(), 4)
        self.assertEqual(restored, cfg)

    def test_split_order(self):
        """Varying names are kept in storage order"""
        split = ParameterSplit(["omega", "gamma2", "re_zeta1"], 2)
        self.assertEqual(split.varying, ["gamma2", "re_zeta1", "omega"])
        np.testing.assert_array_equal(split.indices, [1, 2, 7])
        self.assertEqual(len(split.fixed), 5)

    def test_unknown_name(self):
        """Unknown coordinate names are input errors"""
        with self.assertRaises(InputError):
            ParameterSplit(["zeta1"], 2)

    def test_repeated_name(self):
        """Repeated coordinate names are input errors"""
        with self.assertRaises(InputError):
            ParameterSplit(["gamma1", "gamma1"], 2)

    def test_mismatched_sizes(self):
        """Circulations and centers must have the same length"""
        with self.assertRaises(InputError):
            VortexConfiguration([1.0, 2.0], [0.0])

    def test_malformed_object(self):
        """Configuration objects without circulations are input errors"""
        with self.assertRaises(InputError):
            VortexConfiguration.from_dict({"centers": [[0.0, 0.0]]})

    def test_unknown_source(self):
        """Unknown packaged names and missing files are input errors"""
        with self.assertRaises(InputError):
            load_configuration("no-such-configuration")


class TestIdentities(unittest.TestCase):
    def test_random_configurations(self):
        """The translation and rotation identities hold for every configuration"""
        rng = np.random.default_rng(42)
        for M in (2, 3, 5, 8):
            with self.subTest(M=M):
                translation, rotation = pointvortex.check_pv_identities(random_configuration(rng, M))
                self.assertLess(abs(translation), 1e-10)
                self.assertLess(abs(rotation), 1e-10)

    def test_not_steady(self):
        """Classification needs a steady configuration"""
        cfg = load_builtin("rotating-pair")
        moved = cfg.with_coordinates([1.2], [2])
        self.assertFalse(pointvortex.is_steady(moved))
        with self.assertRaises(PreconditionError):
            pointvortex.classify_nondegeneracy(moved)

    def test_both_frames(self):
        """Nonzero c and Ω together have no steady kind"""
        with self.assertRaises(PreconditionError):
            pointvortex.steady_kind(VortexConfiguration([1.0], [0.0], 1.0, 1.0))

    def test_wrong_split_size(self):
        """The Newton solve needs 2M minus the codimension varying coordinates"""
        cfg = load_builtin("rotating-pair")
        with self.assertRaises(PreconditionError):
            pointvortex.solve_steady_pv(cfg, ParameterSplit(["re_zeta1"], 2))

    def test_frame_coordinate_fixed(self):
        """A solve cannot vary the frame coordinate its kind excludes"""
        with self.assertRaises(InputError) as context:
            pointvortex.solve_steady_pv(load_builtin("rotating-pair"), ParameterSplit(["re_zeta1", "re_zeta2", "c"], 2))
        self.assertIn("'c'", str(context.exception))
        with self.assertRaises(InputError):
            pointvortex.solve_steady_pv(
                load_builtin("translating-pair"), ParameterSplit(["re_zeta1", "re_zeta2", "omega"], 2)
            )
