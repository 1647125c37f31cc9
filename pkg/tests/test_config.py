import logging
import os
import unittest
from unittest.mock import patch

from app.config import (
    DevelopmentSettings,
    Environment,
    ProductionSettings,
    SettingsFactory,
    TestingSettings,
    validate_environment_config,
)
from app.core.logging import setup_logging
from app.core.utils.exceptions import (
    BlowUpError,
    GeometryError,
    OutputError,
    ReductionError,
    ScenarioError,
    convert_exception_to_exit_code,
)
from app.core.utils.sampling import batch_sizes, run_batched


class TestSettingsFactory(unittest.TestCase):
    def test_environment_selection(self):
        self.assertIsInstance(SettingsFactory.create_settings("testing"), TestingSettings)
        self.assertIsInstance(SettingsFactory.create_settings(Environment.PRODUCTION), ProductionSettings)
        self.assertIsInstance(SettingsFactory.create_settings("unknown"), DevelopmentSettings)

    @patch.dict(os.environ, {"DARBOUX_ENV": "production"})
    def test_environment_variable(self):
        settings = SettingsFactory.create_settings()
        self.assertTrue(settings.is_production)
        self.assertEqual(settings.workers, 4)

    @patch.dict(os.environ, {"SUBSPACE_TOL": "1e-6"})
    def test_tolerances_come_from_the_environment(self):
        self.assertEqual(TestingSettings().subspace_tol, 1e-6)

    def test_available_environments(self):
        self.assertEqual(set(SettingsFactory.available_environments()), {"development", "production", "testing"})

    def test_validate_environment_config(self):
        config = validate_environment_config("testing")
        self.assertTrue(config["valid"])
        self.assertEqual(config["log_level"], "DEBUG")


class TestExitCodes(unittest.TestCase):
    def test_service_exceptions_carry_codes(self):
        self.assertEqual(convert_exception_to_exit_code(ScenarioError("bad")), 2)
        self.assertEqual(convert_exception_to_exit_code(GeometryError("rank")), 2)
        self.assertEqual(convert_exception_to_exit_code(ReductionError("mu")), 2)
        self.assertEqual(convert_exception_to_exit_code(BlowUpError("inf")), 1)
        self.assertEqual(convert_exception_to_exit_code(OutputError("disk")), 3)

    def test_other_exceptions(self):
        self.assertEqual(convert_exception_to_exit_code(PermissionError("denied")), 3)
        self.assertEqual(convert_exception_to_exit_code(RuntimeError("boom")), 1)


class TestSampling(unittest.TestCase):
    def test_batch_sizes(self):
        self.assertEqual(batch_sizes(120, 50), [50, 50, 20])
        self.assertEqual(batch_sizes(0, 50), [])

    def test_results_do_not_depend_on_workers(self):
        def check(rng, size):
            return float(rng.standard_normal(size).max())

        serial = run_batched(TestingSettings(workers=1), check, seed=5, samples=230)
        threaded = run_batched(TestingSettings(workers=3), check, seed=5, samples=230)
        self.assertEqual(serial, threaded)

    def test_tuple_results_reduce_elementwise(self):
        result = run_batched(TestingSettings(), lambda rng, size: (float(size), -float(size)), seed=1, samples=120)
        self.assertEqual(result, (50.0, -20.0))


class TestLogging(unittest.TestCase):
    def test_setup_logging(self):
        logger = setup_logging(TestingSettings(), "warning")
        self.assertEqual(logger.name, "app")
        self.assertEqual(logging.getLogger().level, logging.WARNING)
        self.assertEqual(logging.getLogger("scipy").level, logging.WARNING)


if __name__ == "__main__":
    unittest.main()
