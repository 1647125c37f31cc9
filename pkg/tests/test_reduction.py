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
from app.core.utils.exceptions import ReductionError
from tests.support import build_services

SYMPLECTIC_2 = Chart(kind=ChartKind.SYMPLECTIC, n=2)
SYMPLECTIC_3 = Chart(kind=ChartKind.SYMPLECTIC, n=3)
CONTACT_2 = Chart(kind=ChartKind.CONTACT, n=2)

KEPLER_X0 = [1.0, 0.0, 0.0, 0.2, 1.0, 0.0]
CONTACT_X0 = [0.5, -0.3, 0.0, 0.4, 0.1]
ADAPTIVE = IntegratorConfig(method="rk45", rel_tol=1e-10, abs_tol=1e-12, t_span=(0.0, 5.0))
FIXED = IntegratorConfig(step=1e-3, t_span=(0.0, 5.0), record_every=10)


class ReductionTestCase(unittest.TestCase):
    def setUp(self):
        services = build_services()
        self.geometry = services.geometry
        self.hamiltonian = services.hamiltonian
        self.dynamics = services.dynamics
        self.symmetry = services.symmetry
        self.reduction = services.reduction
        self.rng = np.random.default_rng(21)

    def kepler(self):
        H = self.hamiltonian.build(CentralPotential(), SYMPLECTIC_3)
        action = self.symmetry.action("lifted_rotation_so3", SYMPLECTIC_3)
        return H, action, self.reduction.reduce(action, H, [0.0, 0.0, 1.0])

    def drifting(self, k: int = 1):
        spec = ContactDamped(base=TranslationInvariant(drift=[0.3, -0.2]), gamma=0.2)
        H = self.hamiltonian.build(spec, CONTACT_2)
        action = self.symmetry.action("contact_translation", CONTACT_2, k=k)
        return H, action, self.reduction.reduce(action, H)

    def cylinder(self):
        # harmonic in q², free in q¹
        spec = SeparableMechanical(potential=PotentialSpec(kind="harmonic", indices=[1]))
        H = self.hamiltonian.build(spec, SYMPLECTIC_2)
        action = self.symmetry.action("lifted_translation", SYMPLECTIC_2, k=1)
        return H, action, self.reduction.reduce(action, H, [0.5])


class TestReducedSystems(ReductionTestCase):
    def test_reduced_charts(self):
        _, _, kepler = self.kepler()
        self.assertEqual(kepler.reduced_chart, Chart(kind=ChartKind.SYMPLECTIC, n=1))
        _, _, contact = self.drifting(k=2)
        self.assertEqual(contact.reduced_chart, Chart(kind=ChartKind.CONTACT, n=0))
        _, _, cylinder = self.cylinder()
        self.assertEqual(cylinder.reduced_chart, Chart(kind=ChartKind.SYMPLECTIC, n=1))

    def test_section_is_a_right_inverse(self):
        for reduced in (self.kepler()[2], self.drifting()[2], self.cylinder()[2]):
            for _ in range(20):
                y = self.rng.standard_normal(reduced.reduced_chart.dim)
                if reduced.family == "lifted_rotation_so3":
                    y[0] = 0.5 + abs(y[0])
                self.assertLess(self.reduction.section_identity_residual(reduced, y), 1e-12)
                self.assertLess(self.reduction.level_set_residual(reduced, reduced.section_array(y)), 1e-12)

    def test_reduced_hamiltonians(self):
        for H, _, reduced in (self.kepler(), self.drifting(), self.cylinder()):
            self.assertLess(self.reduction.check_reduced_hamiltonian(reduced, H, self.rng, 50), 1e-10)

    def test_effective_potential(self):
        _, _, reduced = self.kepler()
        # p_r²/2 + μ₀²/2r² − 1/r at r = 2, p_r = 0.5
        self.assertAlmostEqual(reduced.reduced_H.value(np.array([2.0, 0.5])), 0.125 + 0.125 - 0.5)

    def test_cylinder_reduced_hamiltonian(self):
        _, _, reduced = self.cylinder()
        self.assertAlmostEqual(reduced.reduced_H.value(np.array([1.0, 0.0])), 0.625)

    def test_reeb_projects_to_reeb(self):
        _, _, reduced = self.drifting()
        pt = self.geometry.point(CONTACT_2, CONTACT_X0)
        self.assertLess(self.reduction.check_reeb_projection(reduced, pt), 1e-10)

    def test_reeb_projection_needs_contact_reduction(self):
        _, _, reduced = self.cylinder()
        with self.assertRaises(ReductionError):
            self.reduction.check_reeb_projection(reduced, self.geometry.point(SYMPLECTIC_2, [0.0, 0.0, 0.5, 0.0]))


class TestReductionErrors(ReductionTestCase):
    def test_contact_reduction_needs_zero_level(self):
        spec = ContactDamped(base=TranslationInvariant(drift=[0.3, -0.2]), gamma=0.2)
        H = self.hamiltonian.build(spec, CONTACT_2)
        action = self.symmetry.action("contact_translation", CONTACT_2, k=1)
        with self.assertRaises(ReductionError) as ctx:
            self.reduction.reduce(action, H, [0.5])
        self.assertIn("mu = 0", ctx.exception.message)
        self.assertEqual(ctx.exception.exit_code, 2)

    def test_mu_length(self):
        H = self.hamiltonian.build(TranslationInvariant(), SYMPLECTIC_2)
        with self.assertRaises(ReductionError):
            self.reduction.reduce_translation_symplectic(H, 1, [0.0, 1.0])

    def test_full_translation_quotient_is_rejected(self):
        H = self.hamiltonian.build(TranslationInvariant(), SYMPLECTIC_2)
        with self.assertRaises(ReductionError):
            self.reduction.reduce_translation_symplectic(H, 2, [0.0, 0.0])

    def test_so3_needs_nonzero_vertical_momentum(self):
        H = self.hamiltonian.build(CentralPotential(), SYMPLECTIC_3)
        action = self.symmetry.action("lifted_rotation_so3", SYMPLECTIC_3)
        with self.assertRaises(ReductionError):
            self.reduction.reduce(action, H, [0.0, 0.0, 0.0])
        with self.assertRaises(ReductionError):
            self.reduction.reduce(action, H, [1.0, 0.0, 0.0])

    def test_so3_needs_central_potential(self):
        H = self.hamiltonian.build(SeparableMechanical(potential=PotentialSpec(kind="harmonic")), SYMPLECTIC_3)
        with self.assertRaises(ReductionError):
            self.reduction.reduce_so3(H, 1.0)

    def test_initial_point_must_lie_on_level_set(self):
        H, _, reduced = self.drifting()
        off = self.geometry.point(CONTACT_2, [0.5, -0.3, 0.7, 0.4, 0.1])
        with self.assertRaises(ReductionError):
            self.reduction.check_commutation(H, reduced, off, FIXED)


class TestTangency(ReductionTestCase):
    def test_orbit_is_the_level_set_complement(self):
        for k in (1, 2):
            action = self.symmetry.action("contact_translation", CONTACT_2, k=k)
            x = self.rng.standard_normal(5)
            x[2:2 + k] = 0.0
            result = self.reduction.level_set_tangency_check(action, self.geometry.point(CONTACT_2, x), [0.0] * k)
            self.assertEqual(result.level_rank, 5 - k)
            self.assertEqual(result.orbit_rank, k)
            self.assertLess(result.complement_residual, 1e-8)
            self.assertLess(result.orbit_containment_residual, 1e-8)
            self.assertLess(result.vertical_residual, 1e-8)

        action = self.symmetry.action("lifted_translation", SYMPLECTIC_2, k=1)
        result = self.reduction.level_set_tangency_check(action, self.geometry.point(SYMPLECTIC_2, [0.1, 0.2, 0.5, -1.0]), [0.5])
        self.assertLess(result.complement_residual, 1e-8)
        self.assertIsNone(result.vertical_residual)

    def test_point_must_lie_on_the_level_set(self):
        action = self.symmetry.action("contact_translation", CONTACT_2, k=1)
        off = self.geometry.point(CONTACT_2, [0.5, -0.3, 0.2, 0.4, 0.1])
        with self.assertRaises(ReductionError) as ctx:
            self.reduction.level_set_tangency_check(action, off, [0.0])
        self.assertIn("level set", ctx.exception.message)
        with self.assertRaises(ReductionError):
            self.reduction.level_set_tangency_check(action, off, [0.0, 0.0])

        lifted = self.symmetry.action("lifted_translation", SYMPLECTIC_2, k=1)
        with self.assertRaises(ReductionError):
            self.reduction.level_set_tangency_check(lifted, self.geometry.point(SYMPLECTIC_2, [0.1, 0.2, 0.5, -1.0]), [0.0])

    def test_rotations_are_not_checked(self):
        action = self.symmetry.action("lifted_rotation_so3", SYMPLECTIC_3)
        with self.assertRaises(ReductionError):
            self.reduction.level_set_tangency_check(action, self.geometry.point(SYMPLECTIC_3, KEPLER_X0), None)


class TestFlows(ReductionTestCase):
    def test_kepler_commutation(self):
        H, _, reduced = self.kepler()
        result = self.reduction.check_commutation(H, reduced, self.geometry.point(SYMPLECTIC_3, KEPLER_X0), ADAPTIVE)
        self.assertEqual(result.times[-1], 5.0)
        self.assertLess(result.max_deviation, 1e-5)

    def test_contact_commutation(self):
        H, action, reduced = self.drifting()
        result = self.reduction.check_commutation(H, reduced, self.geometry.point(CONTACT_2, CONTACT_X0), FIXED)
        self.assertLess(result.max_deviation, 1e-10)
        self.assertLess(self.reduction.check_level_set_invariance(result.full, action), 1e-12)

    def test_contact_flow_stays_on_zero_level(self):
        H, _, _ = self.drifting()
        traj = self.dynamics.simulate(H, self.geometry.point(CONTACT_2, CONTACT_X0), FIXED)
        self.assertEqual(traj.times[-1], 5.0)
        self.assertLess(float(np.max(np.abs(traj.states[:, 2]))), 1e-9)
        # the free momentum still decays under the damping
        self.assertGreater(float(np.ptp(traj.states[:, 3])), 1e-3)

    def test_cylinder_commutation(self):
        H, action, reduced = self.cylinder()
        x0 = self.geometry.point(SYMPLECTIC_2, [0.3, 1.0, 0.5, 0.0])
        result = self.reduction.check_commutation(H, reduced, x0, FIXED)
        self.assertLess(result.max_deviation, 1e-10)
        self.assertLess(self.reduction.check_level_set_invariance(result.full, action, [0.5]), 1e-12)

    def test_kepler_reconstruction(self):
        H, _, reduced = self.kepler()
        x0 = self.geometry.point(SYMPLECTIC_3, KEPLER_X0)
        small = self.dynamics.flow(reduced.vector_field, reduced.project(x0), ADAPTIVE)
        result = self.reduction.reconstruct(small, reduced, H, x0)
        direct = self.dynamics.flow(self.hamiltonian.vector_field(H), x0, ADAPTIVE, t_eval=small.times)
        self.assertLess(float(np.max(np.abs(result.trajectory.states - direct.states))), 1e-4)
        self.assertLess(result.max_lsq_residual, 1e-6)
        # ξ is the angular velocity μ₀/r² about the z-axis
        r = small.states[:, 0]
        np.testing.assert_allclose(result.xi[:, 2], 1.0 / r ** 2, rtol=1e-6)

    def test_circular_orbit_reconstruction(self):
        H, _, reduced = self.kepler()
        x0 = self.geometry.point(SYMPLECTIC_3, [1.0, 0.0, 0.0, 0.0, 1.0, 0.0])
        small = self.dynamics.flow(reduced.vector_field, reduced.project(x0), ADAPTIVE)
        rebuilt = self.reduction.reconstruct(small, reduced, H, x0).trajectory
        t = rebuilt.times
        expected = np.column_stack([np.cos(t), np.sin(t), np.zeros_like(t)])
        self.assertLess(float(np.max(np.abs(rebuilt.states[:, :3] - expected))), 1e-4)

    def test_contact_reconstruction(self):
        H, _, reduced = self.drifting()
        x0 = self.geometry.point(CONTACT_2, CONTACT_X0)
        small = self.dynamics.flow(reduced.vector_field, reduced.project(x0), FIXED)
        result = self.reduction.reconstruct(small, reduced, H, x0)
        direct = self.dynamics.flow(self.hamiltonian.vector_field(H), x0, FIXED)
        self.assertLess(float(np.max(np.abs(result.trajectory.states - direct.states))), 1e-8)
        # q̇₁ = ∂H/∂p₁ at p₁ = 0 is the drift
        np.testing.assert_allclose(result.xi[:, 0], 0.3, atol=1e-8)

    def test_cylinder_reconstruction(self):
        H, _, reduced = self.cylinder()
        x0 = self.geometry.point(SYMPLECTIC_2, [0.3, 1.0, 0.5, 0.0])
        small = self.dynamics.flow(reduced.vector_field, reduced.project(x0), FIXED)
        rebuilt = self.reduction.reconstruct(small, reduced, H, x0).trajectory
        np.testing.assert_allclose(rebuilt.states[:, 0], 0.3 + 0.5 * rebuilt.times, atol=1e-8)


if __name__ == "__main__":
    unittest.main()
