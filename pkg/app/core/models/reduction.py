from typing import Any, Callable, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from app.core.models.dynamics import Trajectory
from app.core.models.geometry import Chart, Point
from app.core.models.hamiltonian import ScalarField
from app.core.models.symmetry import ActionFamily, GroupAction, MomentumValue

ArrayMap = Callable[[np.ndarray], np.ndarray]


class ReducedSystem(BaseModel):
    """Reduced space M_μ realized as an explicit chart with a project/section pair.

    project: level set (full chart) → reduced chart.
    section: reduced chart → level set, with project ∘ section = id.
    """
    family: ActionFamily
    action: GroupAction
    k: int = Field(..., description="Dimension of the acting group's algebra")
    full_chart: Chart
    reduced_chart: Chart
    reduced_H: ScalarField
    mu: MomentumValue
    project_fn: ArrayMap
    section_fn: ArrayMap
    vector_field: Any = Field(None, description="Hamiltonian vector field of reduced_H")

    def project_array(self, x: np.ndarray) -> np.ndarray:
        return self.project_fn(x)

    def section_array(self, y: np.ndarray) -> np.ndarray:
        return self.section_fn(y)

    def project(self, pt: Point) -> Point:
        return Point(chart=self.reduced_chart, coords=self.project_fn(pt.coords))

    def section(self, pt: Point) -> Point:
        return Point(chart=self.full_chart, coords=self.section_fn(pt.coords))

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)


class CommutationResult(BaseModel):
    """‖π(Φ_t x0) − Φ_t^μ(π x0)‖ along a shared time grid."""
    times: np.ndarray
    deviation: np.ndarray
    max_deviation: float
    full: Optional[Trajectory] = None
    reduced: Optional[Trajectory] = None

    model_config = ConfigDict(arbitrary_types_allowed=True)


class ReconstructionResult(BaseModel):
    """c(t) = Φ_{g(t)} d(t) rebuilt from a reduced trajectory."""
    trajectory: Trajectory
    xi: np.ndarray = Field(..., description="Algebra curve ξ(t), shape (len(times), dim 𝔤)")
    max_lsq_residual: float = 0.0

    model_config = ConfigDict(arbitrary_types_allowed=True)


class LevelSetTangency(BaseModel):
    """Orbit/level-set tangency residuals at one point of J⁻¹(μ)."""
    level_rank: int
    orbit_rank: int
    complement_residual: float = Field(..., description="Subspace residual between the level-set complement and T_x(Gx)")
    orbit_containment_residual: float = Field(..., description="Distance of T_x(Gx) from T_xJ⁻¹(μ)")
    vertical_residual: Optional[float] = Field(None, description="Distance of 𝓡 from T_xJ⁻¹(μ) (contact only)")
