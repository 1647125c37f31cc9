from typing import Any, Dict, List, Optional


class ServiceException(Exception):
    """Base exception for the mechanics services."""

    exit_code: int = 1

    def __init__(
        self,
        message: str,
        details: Optional[Dict[str, Any]] = None,
        exit_code: Optional[int] = None
    ):
        self.message = message
        self.details = details or {}
        if exit_code is not None:
            self.exit_code = exit_code
        super().__init__(self.message)


class ValidationException(ServiceException):
    """Exception for invalid inputs."""
    exit_code = 2


class ChartMismatchError(ValidationException):
    """Raised when an operation receives a point or vector on the wrong chart."""
    pass


class ScenarioError(ValidationException):
    """Scenario file failed schema validation."""

    def __init__(self, message: str, errors: Optional[List[Dict[str, Any]]] = None):
        super().__init__(message, details={"errors": errors or []})
        self.errors = errors or []


class ConfigurationException(ServiceException):
    """Exception for configuration errors."""
    exit_code = 2


class GeometryError(ServiceException):
    """Rank-deficient bases, failed musical solves, non-regular momentum values."""
    exit_code = 2


class NumericalError(ServiceException):
    """Non-finite evaluations or derivatives."""
    exit_code = 1


class IntegrationError(NumericalError):
    """Integration aborted; the partial trajectory is attached."""

    def __init__(self, message: str, trajectory: Any = None, details: Optional[Dict[str, Any]] = None):
        super().__init__(message, details)
        self.trajectory = trajectory


class StepUnderflowError(IntegrationError):
    pass


class BlowUpError(IntegrationError):
    pass


class SymmetryError(ServiceException):
    """Family/chart mismatch or invalid group data."""
    exit_code = 2


class InvarianceError(SymmetryError):
    """The Hamiltonian is not invariant under the requested action."""
    pass


class ReductionError(ServiceException):
    """Reduction cannot be performed for the requested data."""
    exit_code = 2


class ReconstructionError(ReductionError):
    pass


class OutputError(ServiceException):
    """Exception for I/O failures while writing results."""
    exit_code = 3


def convert_exception_to_exit_code(exc: BaseException) -> int:
    """Convert any exception to the CLI exit code."""
    if isinstance(exc, ServiceException):
        return exc.exit_code
    if isinstance(exc, OSError):
        return 3
    return 1
