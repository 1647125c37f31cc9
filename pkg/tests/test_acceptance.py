"""Runs the bundled scenarios end to end and expects every check to pass."""
import tempfile
import unittest
from pathlib import Path

from tests.support import build_services

SCENARIOS = Path(__file__).parent.parent / "test_data" / "scenarios"

RUNS = [
    ("simulate", "damped_oscillator.json"),
    ("invariants", "damped_oscillator.json"),
    ("reduce", "kepler.json"),
    ("reconstruct", "kepler.json"),
    ("reduce", "contact_translation.json"),
    ("reconstruct", "contact_translation.json"),
    ("commute", "commute.json"),
    ("symplectify", "symplectify.json"),
    ("classify", "classify.json"),
]


class TestBundledScenarios(unittest.TestCase):
    def setUp(self):
        self.service = build_services().scenario
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def test_scenarios_pass(self):
        for command, filename in RUNS:
            with self.subTest(command=command, scenario=filename):
                scenario = self.service.load_scenario(SCENARIOS / filename)
                report = self.service.run(command, scenario, out_dir=Path(self.tmp.name) / command, samples=50)
                failed = [(c.id, c.residual, c.tolerance) for c in report.checks if not c.passed]
                self.assertTrue(report.passed, failed)
                self.assertGreater(len(report.checks), 0)

    def test_expected_checks_run(self):
        expected = {
            ("simulate", "damped_oscillator.json"): {"dissipation_decay", "damped_newton", "analytic_damped"},
            ("invariants", "damped_oscillator.json"): {"dissipation_law", "energy_law", "divergence", "volume"},
            ("reduce", "contact_translation.json"): {"reeb_projection", "level_set_tangency", "commutation"},
            ("classify", "classify.json"): {"classification", "lift_agreement", "flat_sharp", "sharp_lambda"},
        }
        for (command, filename), ids in expected.items():
            with self.subTest(command=command, scenario=filename):
                scenario = self.service.load_scenario(SCENARIOS / filename)
                report = self.service.run(command, scenario, out_dir=Path(self.tmp.name) / command, samples=20)
                self.assertTrue(ids <= {c.id for c in report.checks})

    def test_reduced_trajectory_is_written(self):
        out = Path(self.tmp.name) / "kepler"
        scenario = self.service.load_scenario(SCENARIOS / "kepler.json")
        self.service.run("reduce", scenario, out_dir=out, samples=10)
        header = (out / "reduce.csv").read_text().splitlines()[0]
        self.assertEqual(header, "t,q,p,H")


if __name__ == "__main__":
    unittest.main()
