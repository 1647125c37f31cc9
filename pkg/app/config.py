import os
from pydantic_settings import BaseSettings, SettingsConfigDict
from typing import List, Optional, Type, Dict, Any
from functools import lru_cache
from enum import Enum
from pathlib import Path

class Environment(str, Enum):
    DEVELOPMENT = "development"
    PRODUCTION = "production"
    TESTING = "testing"


class Settings(BaseSettings):
    """Base settings that are common across all environments."""

    # App metadata - rarely changes across environments
    app_name: str = "darboux_mech"
    app_version: str = "1.0.0"
    app_description: str = "Symplectic and contact Hamiltonian mechanics in Darboux coordinates, with reduction and symplectification checks."

    # Static paths - same across environments
    base_dir: Path = Path(__file__).parent.parent
    scenarios_dir: Path = base_dir / "test_data" / "scenarios"
    output_dir: Path = Path(".")

    # Log format - consistent formatting
    log_format: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

    # Environment tracking
    environment: Environment = Environment.DEVELOPMENT

    # Properties that might be overridden by environment-specific settings
    debug: bool = True
    log_level: str = "INFO"

    # Randomized checks
    default_seed: int = 42
    default_samples: int = 1000
    batch_size: int = 250
    workers: int = 1

    # Subspace linear algebra
    subspace_tol: float = 1e-8
    independence_tol: float = 1e-9
    svd_cutoff: float = 1e-10
    sharp_residual_tol: float = 1e-8

    # Finite differences
    fd_relative_step: float = 1e-6
    fd_min_step: float = 1e-6
    jacobian_step: float = 1e-5

    # Integration
    default_step: float = 1e-3
    default_rel_tol: float = 1e-9
    default_abs_tol: float = 1e-12
    blowup_threshold: float = 1e12
    min_adaptive_step: float = 1e-14

    # Symmetry and reduction
    invariance_tol: float = 1e-9
    invariance_samples: int = 32
    level_set_tol: float = 1e-9
    lsq_residual_tol: float = 1e-6
    min_radius: float = 1e-9

    @property
    def is_development(self) -> bool:
        return self.environment == Environment.DEVELOPMENT

    @property
    def is_production(self) -> bool:
        return self.environment == Environment.PRODUCTION

    @property
    def is_testing(self) -> bool:
        return self.environment == Environment.TESTING

    model_config = SettingsConfigDict(env_file=".env", env_file_encoding="utf-8", case_sensitive=False)


class DevelopmentSettings(Settings):
    """Development environment settings."""

    app_name: str = "darboux_mech DEV"

    environment: Environment = Environment.DEVELOPMENT
    debug: bool = True
    log_level: str = "DEBUG"

    model_config = SettingsConfigDict(env_file=".env.development", env_file_encoding="utf-8", case_sensitive=False)


class ProductionSettings(Settings):
    """Production settings: batch runs on a workstation or CI."""

    environment: Environment = Environment.PRODUCTION
    debug: bool = False
    log_level: str = "WARNING"
    workers: int = 4

    model_config = SettingsConfigDict(env_file=".env.production", env_file_encoding="utf-8", case_sensitive=False)


class TestingSettings(Settings):
    """Testing environment settings."""

    environment: Environment = Environment.TESTING
    debug: bool = True
    log_level: str = "DEBUG"

    # Smaller default batches keep the randomized suites quick
    default_samples: int = 200
    batch_size: int = 50

    model_config = SettingsConfigDict(env_file=".env.testing", env_file_encoding="utf-8", case_sensitive=False)


# Settings factory
class SettingsFactory:
    """Factory for creating environment-specific settings."""

    _settings_map: Dict[str, Type[Settings]] = {
        Environment.DEVELOPMENT: DevelopmentSettings,
        Environment.PRODUCTION: ProductionSettings,
        Environment.TESTING: TestingSettings,
    }

    @classmethod
    def create_settings(cls, environment: Optional[str] = None) -> Settings:
        """Create settings instance for the specified environment."""
        if environment is None:
            environment = os.getenv("DARBOUX_ENV", Environment.DEVELOPMENT)

        # Normalize environment string
        environment = str(getattr(environment, "value", environment)).lower().strip()

        # Get the appropriate settings class
        settings_class = cls._settings_map.get(environment, DevelopmentSettings)

        return settings_class()

    @classmethod
    def register_environment(cls, env_name: str, settings_class: Type[Settings]):
        """Register a new environment settings class."""
        cls._settings_map[env_name] = settings_class

    @classmethod
    def available_environments(cls) -> List[str]:
        """Get list of available environments."""
        return [str(getattr(key, "value", key)) for key in cls._settings_map.keys()]


# Cached settings instances
@lru_cache()
def get_settings() -> Settings:
    """Get cached settings instance based on current environment."""
    return SettingsFactory.create_settings()


def get_testing_settings() -> TestingSettings:
    """Get testing settings instance."""
    return TestingSettings()


def validate_environment_config(env: str) -> Dict[str, Any]:
    """Validate and return configuration for an environment."""
    try:
        settings = SettingsFactory.create_settings(env)
        return {
            "environment": settings.environment,
            "debug": settings.debug,
            "log_level": settings.log_level,
            "workers": settings.workers,
            "valid": True
        }
    except Exception as e:
        return {
            "environment": env,
            "error": str(e),
            "valid": False
        }
