import logging
from typing import Optional

from app.config import get_settings
from app.core.services.corpus_service import CorpusService
from app.core.services.dynamics_service import DynamicsService
from app.core.services.geometry_service import GeometryService
from app.core.services.hamiltonian_service import HamiltonianService
from app.core.services.reduction_service import ReductionService
from app.core.services.scenario_service import ScenarioService
from app.core.services.symmetry_service import SymmetryService
from app.core.services.symplectification_service import SymplectificationService


# Global service instances
_geometry_service: Optional[GeometryService] = None
_hamiltonian_service: Optional[HamiltonianService] = None
_dynamics_service: Optional[DynamicsService] = None
_symmetry_service: Optional[SymmetryService] = None
_reduction_service: Optional[ReductionService] = None
_corpus_service: Optional[CorpusService] = None
_symplectification_service: Optional[SymplectificationService] = None
_scenario_service: Optional[ScenarioService] = None


logger = logging.getLogger(__name__)


def get_geometry_service() -> GeometryService:
    global _geometry_service
    if _geometry_service is None:
        _geometry_service = GeometryService(get_settings())
    return _geometry_service


def get_hamiltonian_service() -> HamiltonianService:
    global _hamiltonian_service
    if _hamiltonian_service is None:
        _hamiltonian_service = HamiltonianService(get_settings(), get_geometry_service())
    return _hamiltonian_service


def get_dynamics_service() -> DynamicsService:
    global _dynamics_service
    if _dynamics_service is None:
        _dynamics_service = DynamicsService(get_settings(), get_hamiltonian_service())
    return _dynamics_service


def get_symmetry_service() -> SymmetryService:
    global _symmetry_service
    if _symmetry_service is None:
        _symmetry_service = SymmetryService(get_settings(), get_geometry_service(), get_hamiltonian_service())
    return _symmetry_service


def get_reduction_service() -> ReductionService:
    global _reduction_service
    if _reduction_service is None:
        _reduction_service = ReductionService(
            get_settings(),
            get_geometry_service(),
            get_hamiltonian_service(),
            get_symmetry_service(),
            get_dynamics_service(),
        )
    return _reduction_service


def get_corpus_service() -> CorpusService:
    global _corpus_service
    if _corpus_service is None:
        _corpus_service = CorpusService(get_settings(), get_geometry_service())
    return _corpus_service


def get_symplectification_service() -> SymplectificationService:
    global _symplectification_service
    if _symplectification_service is None:
        _symplectification_service = SymplectificationService(
            get_settings(),
            get_geometry_service(),
            get_hamiltonian_service(),
            get_symmetry_service(),
            get_reduction_service(),
            get_corpus_service(),
        )
    return _symplectification_service


def get_scenario_service() -> ScenarioService:
    """Scenario runner wired with every module service."""
    global _scenario_service
    if _scenario_service is None:
        logger.debug("Initializing services...")
        _scenario_service = ScenarioService(
            get_settings(),
            get_geometry_service(),
            get_hamiltonian_service(),
            get_dynamics_service(),
            get_symmetry_service(),
            get_reduction_service(),
            get_symplectification_service(),
            get_corpus_service(),
        )
    return _scenario_service


def reset_services() -> None:
    """Drop cached instances (tests switch settings between cases)."""
    global _geometry_service, _hamiltonian_service, _dynamics_service, _symmetry_service
    global _reduction_service, _corpus_service, _symplectification_service, _scenario_service
    _geometry_service = _hamiltonian_service = _dynamics_service = _symmetry_service = None
    _reduction_service = _corpus_service = _symplectification_service = _scenario_service = None
    get_settings.cache_clear()
