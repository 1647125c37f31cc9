from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field

from app.core.models.geometry import SubmanifoldType


class NondegeneracyResult(BaseModel):
    """det of the Ω Gram matrix against e^{2(n+1)t}."""
    t: float
    determinant: float
    expected: float
    relative_error: float


class LiftedComplementResult(BaseModel):
    """Ω-complement of T(N×ℝ) against (TN)^{⊥_Λ} × {0}."""
    samples: int
    residual: float = Field(..., description="Subspace residual between the two complements")
    t_component: float = Field(..., description="Largest |t|-component of the Ω-complement")
    eta_residual: float = Field(..., description="Largest |η| on the base part of the Ω-complement")


class LiftAgreement(BaseModel):
    """Classifier verdicts on N and N×ℝ for one corpus submanifold."""
    name: str
    samples: int
    base_verdict: SubmanifoldType
    lifted_verdict: SubmanifoldType
    agrees: bool = Field(..., description="Legendrian on N iff Lagrangian on N×ℝ")

    model_config = ConfigDict(use_enum_values=True)


class MuProbe(BaseModel):
    """Lifted momentum at a point with J = μ ≠ 0 and t ≠ 0."""
    t: float
    mu: List[float]
    lifted_momentum: List[float]
    gap: float = Field(..., description="|e^t μ − μ|")
    product_structure_holds: bool


class CommutativityReport(BaseModel):
    """Path A (symplectify the reduced space) against Path B (reduce the symplectification)."""
    n: int
    k: int
    samples: int
    max_residual: float = Field(..., description="max |Ω̄(H_*u, H_*v) − Ω̃(u, v)|")
    representative_residual: float = Field(..., description="max change of Ω̃ across representatives of the same quotient vectors")
    level_residual: float = Field(0.0, description="max |J̃| and |dJ̃·ũ| on the sampled lifted points and vectors")
    mu_probe: Optional[MuProbe] = None
