import unittest

import numpy as np

from app.core.models.dynamics import IntegratorConfig
from app.core.models.geometry import Chart, ChartKind
from app.core.models.hamiltonian import (
    CentralPotential,
    ContactDamped,
    PotentialSpec,
    SeparableMechanical,
    TranslationInvariant,
)
from app.core.models.symmetry import ActionFamily, MomentumValue
from app.core.utils.exceptions import ChartMismatchError, InvarianceError, SymmetryError
from tests.support import build_services

SYMPLECTIC_3 = Chart(kind=ChartKind.SYMPLECTIC, n=3)
CONTACT_2 = Chart(kind=ChartKind.CONTACT, n=2)


class TestActions(unittest.TestCase):
    def setUp(self):
        services = build_services()
        self.geometry = services.geometry
        self.symmetry = services.symmetry
        self.rng = np.random.default_rng(5)

    def test_family_chart_compatibility(self):
        with self.assertRaises(SymmetryError):
            self.symmetry.action(ActionFamily.LIFTED_ROTATION_SO3, CONTACT_2)
        with self.assertRaises(SymmetryError):
            self.symmetry.action(ActionFamily.LIFTED_ROTATION_SO3, Chart(kind=ChartKind.SYMPLECTIC, n=2))
        with self.assertRaises(SymmetryError):
            self.symmetry.action(ActionFamily.LIFTED_TRANSLATION, CONTACT_2)
        with self.assertRaises(SymmetryError):
            self.symmetry.action(ActionFamily.CONTACT_TRANSLATION, SYMPLECTIC_3)
        with self.assertRaises(SymmetryError):
            self.symmetry.action(ActionFamily.CONTACT_TRANSLATION, CONTACT_2, k=3)
        with self.assertRaises(SymmetryError):
            self.symmetry.action("dilation", CONTACT_2)

    def test_algebra_dimensions(self):
        self.assertEqual(self.symmetry.action("lifted_rotation_so3", SYMPLECTIC_3).algebra_dim, 3)
        self.assertEqual(self.symmetry.action("contact_translation", CONTACT_2, k=2).algebra_dim, 2)
        self.assertFalse(self.symmetry.action("lifted_rotation_so3", SYMPLECTIC_3).is_abelian)

    def test_translation_elements(self):
        action = self.symmetry.action("contact_translation", CONTACT_2, k=2)
        with self.assertRaises(SymmetryError):
            self.symmetry.element(action, [1.0])
        g = self.symmetry.element(action, [1.0, -2.0])
        pt = self.geometry.point(CONTACT_2, [0.0, 0.0, 0.5, 0.5, 3.0])
        np.testing.assert_array_equal(self.symmetry.act(action, g, pt).coords, [1.0, -2.0, 0.5, 0.5, 3.0])
        back = self.symmetry.compose(action, g, self.symmetry.inverse(action, g))
        np.testing.assert_array_equal(back.data, self.symmetry.identity(action).data)

    def test_rotation_elements(self):
        action = self.symmetry.action("lifted_rotation_so3", SYMPLECTIC_3)
        with self.assertRaises(SymmetryError):
            self.symmetry.element(action, 2.0 * np.eye(3))
        with self.assertRaises(SymmetryError):
            self.symmetry.element(action, -np.eye(3))
        g = self.symmetry.random_element(action, self.rng)
        back = self.symmetry.compose(action, g, self.symmetry.inverse(action, g))
        np.testing.assert_allclose(back.data, np.eye(3), atol=1e-14)

    def test_rotation_exponential(self):
        action = self.symmetry.action("lifted_rotation_so3", SYMPLECTIC_3)
        g = self.symmetry.exp(action, [0.0, 0.0, np.pi / 2])
        pt = self.geometry.point(SYMPLECTIC_3, [1.0, 0.0, 0.0, 0.0, 0.0, 2.0])
        np.testing.assert_allclose(self.symmetry.act(action, g, pt).coords, [0.0, 1.0, 0.0, 0.0, 0.0, 2.0], atol=1e-15)

    def test_element_of_another_family(self):
        rotation = self.symmetry.action("lifted_rotation_so3", SYMPLECTIC_3)
        translation = self.symmetry.action("lifted_translation", SYMPLECTIC_3, k=3)
        g = self.symmetry.identity(translation)
        with self.assertRaises(SymmetryError):
            self.symmetry.act(rotation, g, self.geometry.point(SYMPLECTIC_3, np.ones(6)))

    def test_action_rejects_points_of_other_charts(self):
        action = self.symmetry.action("contact_translation", CONTACT_2)
        pt = self.geometry.point(Chart(kind=ChartKind.CONTACT, n=1), np.zeros(3))
        with self.assertRaises(ChartMismatchError):
            self.symmetry.act(action, self.symmetry.identity(action), pt)

    def test_generators_match_difference_quotients(self):
        for action in (
            self.symmetry.action("lifted_rotation_so3", SYMPLECTIC_3),
            self.symmetry.action("lifted_translation", SYMPLECTIC_3, k=2),
            self.symmetry.action("contact_translation", CONTACT_2, k=2),
        ):
            pt = self.geometry.random_point(action.chart, self.rng)
            xi = self.rng.standard_normal(action.algebra_dim)
            exact = self.symmetry.generator(action, xi, pt).components
            numeric = self.symmetry.generator_fd(action, xi, pt).components
            np.testing.assert_allclose(numeric, exact, atol=1e-8)

    def test_generator_length_is_checked(self):
        action = self.symmetry.action("lifted_rotation_so3", SYMPLECTIC_3)
        with self.assertRaises(SymmetryError):
            self.symmetry.generator(action, [1.0, 0.0], self.geometry.point(SYMPLECTIC_3, np.ones(6)))


class TestMomentumMaps(unittest.TestCase):
    def setUp(self):
        services = build_services()
        self.geometry = services.geometry
        self.hamiltonian = services.hamiltonian
        self.dynamics = services.dynamics
        self.symmetry = services.symmetry
        self.rng = np.random.default_rng(9)

    def test_momentum_formulas(self):
        pt = self.geometry.point(SYMPLECTIC_3, [1.0, 0.0, 0.0, 0.2, 1.0, 0.0])
        so3 = self.symmetry.action("lifted_rotation_so3", SYMPLECTIC_3)
        np.testing.assert_allclose(self.symmetry.momentum(so3, pt).components, [0.0, 0.0, 1.0])
        lifted = self.symmetry.action("lifted_translation", SYMPLECTIC_3, k=2)
        np.testing.assert_allclose(self.symmetry.momentum(lifted, pt).components, [0.2, 1.0])

        contact = self.symmetry.action("contact_translation", CONTACT_2, k=1)
        cpt = self.geometry.point(CONTACT_2, [0.5, -0.3, 0.0, 0.4, 0.1])
        np.testing.assert_allclose(self.symmetry.momentum(contact, cpt).components, [0.0])

    def test_exact_momentum_agrees_for_lifted_actions(self):
        for action in (
            self.symmetry.action("lifted_rotation_so3", SYMPLECTIC_3),
            self.symmetry.action("lifted_translation", SYMPLECTIC_3, k=3),
        ):
            for _ in range(10):
                pt = self.geometry.random_point(SYMPLECTIC_3, self.rng)
                np.testing.assert_allclose(
                    self.symmetry.exact_momentum(action, pt).components,
                    self.symmetry.momentum(action, pt).components,
                    atol=1e-14,
                )

    def test_exact_momentum_needs_lifted_action(self):
        action = self.symmetry.action("contact_translation", CONTACT_2)
        with self.assertRaises(SymmetryError):
            self.symmetry.exact_momentum(action, self.geometry.point(CONTACT_2, np.zeros(5)))

    def test_momentum_condition(self):
        for action in (
            self.symmetry.action("lifted_rotation_so3", SYMPLECTIC_3),
            self.symmetry.action("lifted_translation", SYMPLECTIC_3, k=2),
            self.symmetry.action("contact_translation", CONTACT_2, k=2),
        ):
            for _ in range(10):
                pt = self.geometry.random_point(action.chart, self.rng)
                self.assertLess(self.symmetry.check_momentum_condition(action, pt), 1e-6, action.label())

    def test_equivariance(self):
        so3 = self.symmetry.action("lifted_rotation_so3", SYMPLECTIC_3)
        contact = self.symmetry.action("contact_translation", CONTACT_2, k=2)
        for _ in range(20):
            g = self.symmetry.random_element(so3, self.rng)
            pt = self.geometry.random_point(SYMPLECTIC_3, self.rng)
            self.assertLess(self.symmetry.check_equivariance(so3, g, pt), 1e-12)
            h = self.symmetry.random_element(contact, self.rng)
            cpt = self.geometry.random_point(CONTACT_2, self.rng)
            self.assertLess(self.symmetry.check_equivariance(contact, h, cpt), 1e-12)

    def test_coadjoint_of_rotation(self):
        so3 = self.symmetry.action("lifted_rotation_so3", SYMPLECTIC_3)
        g = self.symmetry.exp(so3, [0.0, 0.0, np.pi / 2])
        mu = self.symmetry.coadjoint(so3, g, MomentumValue(components=[1.0, 0.0, 0.0]))
        np.testing.assert_allclose(mu.components, [0.0, 1.0, 0.0], atol=1e-15)

    def test_actions_preserve_structure(self):
        for action in (
            self.symmetry.action("lifted_rotation_so3", SYMPLECTIC_3),
            self.symmetry.action("lifted_translation", SYMPLECTIC_3, k=3),
            self.symmetry.action("contact_translation", CONTACT_2, k=2),
        ):
            for _ in range(5):
                g = self.symmetry.random_element(action, self.rng)
                pt = self.geometry.random_point(action.chart, self.rng)
                self.assertLess(self.symmetry.check_liouville_invariance(action, g, pt, self.rng), 1e-12)

    def test_invariance_of_builtin_hamiltonians(self):
        so3 = self.symmetry.action("lifted_rotation_so3", SYMPLECTIC_3)
        kepler = self.hamiltonian.build(CentralPotential(), SYMPLECTIC_3)
        self.assertLess(self.symmetry.require_invariant(so3, kepler, self.rng), 1e-9)

        contact = self.symmetry.action("contact_translation", CONTACT_2, k=2)
        drifting = self.hamiltonian.build(
            ContactDamped(base=TranslationInvariant(drift=[0.3, -0.2]), gamma=0.2), CONTACT_2
        )
        self.assertLess(self.symmetry.require_invariant(contact, drifting, self.rng), 1e-9)

    def test_non_invariant_hamiltonian_is_rejected(self):
        action = self.symmetry.action("lifted_translation", SYMPLECTIC_3, k=1)
        H = self.hamiltonian.build(SeparableMechanical(potential=PotentialSpec(kind="harmonic")), SYMPLECTIC_3)
        with self.assertRaises(InvarianceError):
            self.symmetry.require_invariant(action, H, self.rng)

    def test_contact_momentum_decays_with_friction(self):
        action = self.symmetry.action("contact_translation", CONTACT_2, k=1)
        H = self.hamiltonian.build(ContactDamped(base=TranslationInvariant(drift=[0.3, -0.2]), gamma=0.2), CONTACT_2)
        x0 = self.geometry.point(CONTACT_2, [0.5, -0.3, 0.0, 0.4, 0.1])
        traj = self.dynamics.simulate(H, x0, IntegratorConfig(step=1e-2, t_span=(0.0, 5.0)))
        # p₁ = 0 is preserved exactly
        self.assertLess(self.symmetry.momentum_dissipation_check(action, H, traj).max_residual, 1e-12)

        x1 = self.geometry.point(CONTACT_2, [0.5, -0.3, 0.7, 0.4, 0.1])
        traj = self.dynamics.simulate(H, x1, IntegratorConfig(step=1e-2, t_span=(0.0, 5.0)))
        result = self.symmetry.momentum_dissipation_check(action, H, traj)
        self.assertLess(result.max_residual, 1e-9)
        self.assertAlmostEqual(traj.states[-1, 2], 0.7 * np.exp(-1.0), places=9)

    def test_angular_momentum_is_conserved(self):
        action = self.symmetry.action("lifted_rotation_so3", SYMPLECTIC_3)
        H = self.hamiltonian.build(CentralPotential(), SYMPLECTIC_3)
        x0 = self.geometry.point(SYMPLECTIC_3, [1.0, 0.0, 0.0, 0.2, 1.0, 0.0])
        cfg = IntegratorConfig(method="rk45", rel_tol=1e-10, abs_tol=1e-12, t_span=(0.0, 5.0))
        traj = self.dynamics.simulate(H, x0, cfg)
        self.assertLess(self.symmetry.momentum_dissipation_check(action, H, traj).max_residual, 1e-7)


if __name__ == "__main__":
    unittest.main()
