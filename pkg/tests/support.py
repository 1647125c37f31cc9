"""Service wiring for tests, built on TestingSettings instead of the cached settings."""
from types import SimpleNamespace
from typing import Optional

from app.config import Settings, TestingSettings
from app.core.services.corpus_service import CorpusService
from app.core.services.dynamics_service import DynamicsService
from app.core.services.geometry_service import GeometryService
from app.core.services.hamiltonian_service import HamiltonianService
from app.core.services.reduction_service import ReductionService
from app.core.services.scenario_service import ScenarioService
from app.core.services.symmetry_service import SymmetryService
from app.core.services.symplectification_service import SymplectificationService


def build_services(settings: Optional[Settings] = None) -> SimpleNamespace:
    settings = settings or TestingSettings()
    geometry = GeometryService(settings)
    hamiltonian = HamiltonianService(settings, geometry)
    dynamics = DynamicsService(settings, hamiltonian)
    symmetry = SymmetryService(settings, geometry, hamiltonian)
    reduction = ReductionService(settings, geometry, hamiltonian, symmetry, dynamics)
    corpus = CorpusService(settings, geometry)
    symplectification = SymplectificationService(settings, geometry, hamiltonian, symmetry, reduction, corpus)
    scenario = ScenarioService(
        settings, geometry, hamiltonian, dynamics, symmetry, reduction, symplectification, corpus
    )
    return SimpleNamespace(
        settings=settings,
        geometry=geometry,
        hamiltonian=hamiltonian,
        dynamics=dynamics,
        symmetry=symmetry,
        reduction=reduction,
        corpus=corpus,
        symplectification=symplectification,
        scenario=scenario,
    )
