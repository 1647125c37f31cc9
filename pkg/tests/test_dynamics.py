import tempfile
import unittest
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from app.core.models.dynamics import IntegratorConfig, Trajectory
from app.core.models.geometry import Chart, ChartKind
from app.core.models.hamiltonian import (
    CentralPotential,
    ContactDamped,
    Polynomial,
    PolynomialTerm,
    PotentialSpec,
    SeparableMechanical,
)
from app.core.utils.exceptions import BlowUpError, ChartMismatchError, IntegrationError, ValidationException
from tests.support import build_services


def damped_oscillator(gamma: float) -> ContactDamped:
    return ContactDamped(
        base=SeparableMechanical(potential=PotentialSpec(kind="harmonic", stiffness=1.0)),
        gamma=gamma,
    )


class TestIntegratorConfig(unittest.TestCase):
    def test_defaults(self):
        cfg = IntegratorConfig()
        self.assertEqual(cfg.method, "rk4")
        self.assertEqual(cfg.duration, 1.0)

    def test_invalid_configs(self):
        with self.assertRaises(ValidationError):
            IntegratorConfig(t_span=(1.0, 0.0))
        with self.assertRaises(ValidationError):
            IntegratorConfig(step=0.0)
        with self.assertRaises(ValidationError):
            IntegratorConfig(record_every=0)
        with self.assertRaises(ValidationError):
            IntegratorConfig(method="euler")
        with self.assertRaises(ValidationError):
            IntegratorConfig(tolerance=1e-3)


class TestTrajectory(unittest.TestCase):
    def setUp(self):
        self.chart = Chart(kind=ChartKind.CONTACT, n=1)

    def test_shapes_are_checked(self):
        with self.assertRaises(ValidationError):
            Trajectory(chart=self.chart, times=[0.0, 1.0], states=np.zeros((2, 2)))
        with self.assertRaises(ValidationError):
            Trajectory(chart=self.chart, times=[0.0, 1.0, 2.0], states=np.zeros((2, 3)))

    def test_times_must_increase(self):
        with self.assertRaises(ValidationError):
            Trajectory(chart=self.chart, times=[0.0, 0.0], states=np.zeros((2, 3)))

    def test_observable_lengths(self):
        with self.assertRaises(ValidationError):
            Trajectory(chart=self.chart, times=[0.0, 1.0], states=np.zeros((2, 3)), observables={"H": np.zeros(3)})

    def test_final_point(self):
        traj = Trajectory(chart=self.chart, times=[0.0, 1.0], states=[[0.0, 0.0, 0.0], [1.0, 2.0, 3.0]])
        self.assertEqual(len(traj), 2)
        np.testing.assert_array_equal(traj.final.coords, [1.0, 2.0, 3.0])


class TestFlows(unittest.TestCase):
    def setUp(self):
        services = build_services()
        self.geometry = services.geometry
        self.hamiltonian = services.hamiltonian
        self.dynamics = services.dynamics
        self.contact = Chart(kind=ChartKind.CONTACT, n=1)

    def test_damped_oscillator_matches_closed_form(self):
        gamma = 0.1
        H = self.hamiltonian.build(damped_oscillator(gamma), self.contact)
        x0 = self.geometry.point(self.contact, [1.0, 0.0, 0.0])
        traj = self.dynamics.simulate(H, x0, IntegratorConfig(step=1e-3, t_span=(0.0, 10.0), record_every=10))

        omega = np.sqrt(1.0 - gamma ** 2 / 4.0)
        t = traj.times
        q = np.exp(-gamma * t / 2.0) * (np.cos(omega * t) + gamma / (2.0 * omega) * np.sin(omega * t))
        self.assertLess(float(np.max(np.abs(traj.states[:, 0] - q))), 1e-8)
        self.assertEqual(t[-1], 10.0)

    def test_energy_decays_exponentially(self):
        H = self.hamiltonian.build(damped_oscillator(0.1), self.contact)
        x0 = self.geometry.point(self.contact, [1.0, 0.0, 0.0])
        traj = self.dynamics.simulate(H, x0, IntegratorConfig(step=1e-3, t_span=(0.0, 10.0)))
        report = self.dynamics.monitor(traj, H)
        self.assertAlmostEqual(report.decay_rate, 0.1)
        self.assertIsNone(report.energy_drift)
        self.assertLess(report.relative_decay_residual, 1e-8)
        self.assertLess(report.dissipation_residual, 1e-4)

    def test_undamped_contact_energy_is_conserved(self):
        H = self.hamiltonian.build(damped_oscillator(0.0), self.contact)
        x0 = self.geometry.point(self.contact, [1.0, 0.0, 0.0])
        traj = self.dynamics.simulate(H, x0, IntegratorConfig(step=1e-2, t_span=(0.0, 5.0)))
        report = self.dynamics.monitor(traj, H)
        self.assertIsNotNone(report.energy_drift)
        self.assertLess(report.energy_drift, 1e-8)

    def test_rk4_is_fourth_order(self):
        gamma = 0.1
        H = self.hamiltonian.build(damped_oscillator(gamma), self.contact)
        x0 = self.geometry.point(self.contact, [1.0, 0.0, 0.0])
        omega = np.sqrt(1.0 - gamma ** 2 / 4.0)
        T = 2.0
        decay = np.exp(-gamma * T / 2.0)
        exact = np.array([
            decay * (np.cos(omega * T) + gamma / (2.0 * omega) * np.sin(omega * T)),
            -decay * np.sin(omega * T) / omega,
        ])

        errors = []
        for step in (0.1, 0.05, 0.025):
            traj = self.dynamics.simulate(H, x0, IntegratorConfig(step=step, t_span=(0.0, T)))
            errors.append(float(np.max(np.abs(traj.final.coords[:2] - exact))))
        for coarse, fine in zip(errors, errors[1:]):
            self.assertGreaterEqual(coarse / fine, 12.0, errors)
            self.assertLessEqual(coarse / fine, 20.0, errors)

    def test_zero_field_keeps_the_initial_state(self):
        x0 = self.geometry.point(self.contact, [0.4, -1.2, 3.0])
        for method in ("rk4", "rk45"):
            traj = self.dynamics.flow(lambda pt: np.zeros(3), x0, IntegratorConfig(method=method, step=0.1, t_span=(0.0, 2.0)))
            with self.subTest(method=method):
                self.assertGreater(len(traj), 1)
                np.testing.assert_array_equal(traj.states, np.tile(x0.coords, (len(traj), 1)))

    def test_record_every_keeps_final_state(self):
        H = self.hamiltonian.build(damped_oscillator(0.1), self.contact)
        x0 = self.geometry.point(self.contact, [1.0, 0.0, 0.0])
        traj = self.dynamics.flow(
            self.hamiltonian.vector_field(H), x0, IntegratorConfig(step=0.01, t_span=(0.0, 1.0), record_every=7)
        )
        # steps 0, 7, ..., 98 and the final step 100
        self.assertEqual(len(traj), 16)
        self.assertEqual(traj.times[0], 0.0)
        self.assertEqual(traj.times[-1], 1.0)

    def test_adaptive_kepler_conserves_energy(self):
        chart = Chart(kind=ChartKind.SYMPLECTIC, n=3)
        H = self.hamiltonian.build(CentralPotential(), chart)
        x0 = self.geometry.point(chart, [1.0, 0.0, 0.0, 0.2, 1.0, 0.0])
        cfg = IntegratorConfig(method="rk45", rel_tol=1e-10, abs_tol=1e-12, t_span=(0.0, 5.0))
        traj = self.dynamics.simulate(H, x0, cfg)
        self.assertEqual(traj.times[-1], 5.0)
        self.assertLess(self.dynamics.monitor(traj, H).energy_drift, 1e-7)

    def test_adaptive_output_grid(self):
        H = self.hamiltonian.build(damped_oscillator(0.1), self.contact)
        x0 = self.geometry.point(self.contact, [1.0, 0.0, 0.0])
        grid = np.linspace(0.0, 2.0, 21)
        cfg = IntegratorConfig(method="rk45", t_span=(0.0, 2.0))
        traj = self.dynamics.flow(self.hamiltonian.vector_field(H), x0, cfg, t_eval=grid)
        np.testing.assert_allclose(traj.times, grid)

    def _finite_time_blowup(self):
        chart = Chart(kind=ChartKind.SYMPLECTIC, n=1)
        # H = q²p: q̇ = q² leaves every bounded set before t = 1
        H = self.hamiltonian.build(Polynomial(terms=[PolynomialTerm(coefficient=1.0, exponents=[2, 1])]), chart)
        return H, self.geometry.point(chart, [1.0, 1.0])

    def test_fixed_step_blowup_keeps_partial_trajectory(self):
        H, x0 = self._finite_time_blowup()
        with self.assertRaises(BlowUpError) as ctx:
            self.dynamics.simulate(H, x0, IntegratorConfig(step=1e-3, t_span=(0.0, 2.0)))
        partial = ctx.exception.trajectory
        self.assertIsNotNone(partial)
        self.assertGreater(len(partial), 1)
        self.assertTrue(np.all(np.isfinite(partial.states)))
        self.assertLess(partial.times[-1], 1.01)

    def test_adaptive_blowup_is_reported(self):
        H, x0 = self._finite_time_blowup()
        with self.assertRaises(IntegrationError) as ctx:
            self.dynamics.simulate(H, x0, IntegratorConfig(method="rk45", t_span=(0.0, 2.0)))
        self.assertIsNotNone(ctx.exception.trajectory)
        self.assertGreater(len(ctx.exception.trajectory), 1)


class TestObservablesAndOutput(unittest.TestCase):
    def setUp(self):
        services = build_services()
        self.geometry = services.geometry
        self.hamiltonian = services.hamiltonian
        self.dynamics = services.dynamics
        self.contact = Chart(kind=ChartKind.CONTACT, n=1)
        self.H = self.hamiltonian.build(damped_oscillator(0.1), self.contact)
        x0 = self.geometry.point(self.contact, [1.0, 0.0, 0.0])
        self.traj = self.dynamics.simulate(self.H, x0, IntegratorConfig(step=1e-2, t_span=(0.0, 1.0)))

    def test_observables(self):
        obs = self.dynamics.observe(self.traj, self.H, momentum=lambda x: x[1:2])
        self.assertEqual(sorted(obs), ["H", "J1", "dissipation_residual"])
        np.testing.assert_array_equal(obs["J1"], self.traj.states[:, 1])

    def test_monitor_on_empty_trajectory(self):
        empty = Trajectory(chart=self.contact, times=[], states=[])
        report = self.dynamics.monitor(empty, self.H)
        self.assertEqual(report.samples, 0)
        self.assertTrue(report.empty)
        self.assertEqual(report.model_dump(exclude_none=True), {"samples": 0})

    def test_observe_rejects_other_charts(self):
        other = self.hamiltonian.build(SeparableMechanical(), Chart(kind=ChartKind.SYMPLECTIC, n=1))
        with self.assertRaises(ChartMismatchError):
            self.dynamics.observe(self.traj, other)

    def test_csv_round_trip(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = self.dynamics.write_csv(self.traj, Path(tmp) / "nested" / "simulate.csv")
            with path.open() as fh:
                self.assertEqual(fh.readline().strip(), "t,q,p,z,H,dissipation_residual")
            back = self.dynamics.read_csv(path, self.contact)
        np.testing.assert_array_equal(back.times, self.traj.times)
        np.testing.assert_array_equal(back.states, self.traj.states)
        np.testing.assert_array_equal(back.observables["H"], self.traj.observables["H"])

    def test_csv_header_must_match_chart(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = self.dynamics.write_csv(self.traj, Path(tmp) / "simulate.csv")
            with self.assertRaises(ValidationException):
                self.dynamics.read_csv(path, Chart(kind=ChartKind.CONTACT, n=2))

    def test_variational_volume_follows_contraction(self):
        volume = self.dynamics.variational_volume(self.traj, self.H)
        # det DΦ_t = exp(−(n+1)γt)
        np.testing.assert_allclose(volume.expected, np.exp(-0.2 * self.traj.times), rtol=1e-10)
        self.assertLess(volume.max_ratio_error, 1e-6)

    def test_variational_volume_needs_contact_chart(self):
        chart = Chart(kind=ChartKind.SYMPLECTIC, n=1)
        H = self.hamiltonian.build(SeparableMechanical(), chart)
        traj = self.dynamics.simulate(H, self.geometry.point(chart, [1.0, 0.0]), IntegratorConfig(step=0.1))
        with self.assertRaises(ChartMismatchError):
            self.dynamics.variational_volume(traj, H)


if __name__ == "__main__":
    unittest.main()
