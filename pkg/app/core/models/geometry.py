"""
Darboux charts and the pointwise objects that live on them.

Coordinate layout is a fixed contract: the q-block first, then the p-block,
then z (contact and symplectified charts), then t (symplectified charts).
"""
from enum import Enum
from typing import Any, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class ChartKind(str, Enum):
    """Kinds of Darboux charts."""
    SYMPLECTIC = "symplectic"
    CONTACT = "contact"
    SYMPLECTIFIED = "symplectified"


class PointPosition(str, Enum):
    """Position of a tangent subspace relative to ker η and the Reeb direction."""
    HORIZONTAL = "horizontal"
    VERTICAL = "vertical"
    OBLIQUE = "oblique"


class SubmanifoldType(str, Enum):
    """Submanifold verdicts produced by the classifier."""
    ISOTROPIC = "isotropic"
    COISOTROPIC = "coisotropic"
    LEGENDRIAN = "legendrian"
    LAGRANGIAN = "lagrangian"
    SYMPLECTIC = "symplectic"
    NONE = "none"


def _as_vector(value: Any) -> np.ndarray:
    arr = np.array(value, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise ValueError("all entries must be finite")
    arr.setflags(write=False)
    return arr


class Chart(BaseModel):
    """A global Darboux coordinate model."""
    kind: ChartKind = Field(..., description="Symplectic (2n), contact (2n+1) or symplectified (2n+2)")
    n: int = Field(..., ge=0, description="Degrees of freedom")

    @model_validator(mode="after")
    def _check_degrees(self) -> "Chart":
        # Contact and symplectified charts admit n = 0 ({z} and {z, t}).
        if self.kind == ChartKind.SYMPLECTIC and self.n < 1:
            raise ValueError("symplectic charts need n >= 1")
        return self

    @property
    def dim(self) -> int:
        if self.kind == ChartKind.SYMPLECTIC:
            return 2 * self.n
        if self.kind == ChartKind.CONTACT:
            return 2 * self.n + 1
        return 2 * self.n + 2

    @property
    def q_slice(self) -> slice:
        return slice(0, self.n)

    @property
    def p_slice(self) -> slice:
        return slice(self.n, 2 * self.n)

    @property
    def z_index(self) -> Optional[int]:
        return 2 * self.n if self.kind != ChartKind.SYMPLECTIC else None

    @property
    def t_index(self) -> Optional[int]:
        return 2 * self.n + 1 if self.kind == ChartKind.SYMPLECTIFIED else None

    @property
    def base(self) -> "Chart":
        """Contact chart underneath a symplectified chart."""
        if self.kind != ChartKind.SYMPLECTIFIED:
            return self
        return Chart(kind=ChartKind.CONTACT, n=self.n)

    def coordinate_names(self) -> List[str]:
        if self.n == 1:
            names = ["q", "p"]
        else:
            names = [f"q{i + 1}" for i in range(self.n)] + [f"p{i + 1}" for i in range(self.n)]
        if self.kind != ChartKind.SYMPLECTIC:
            names.append("z")
        if self.kind == ChartKind.SYMPLECTIFIED:
            names.append("t")
        return names

    def label(self) -> str:
        return f"{self.kind.value if isinstance(self.kind, ChartKind) else self.kind}(n={self.n})"

    model_config = ConfigDict(frozen=True)


class Point(BaseModel):
    """A point x ∈ M given by its Darboux coordinates."""
    chart: Chart
    coords: np.ndarray = Field(..., description="Coordinates in the chart layout")

    @field_validator("coords", mode="before")
    @classmethod
    def _coerce(cls, value: Any) -> np.ndarray:
        return _as_vector(value)

    @model_validator(mode="after")
    def _check_length(self) -> "Point":
        if self.coords.shape[0] != self.chart.dim:
            raise ValueError(
                f"coords has length {self.coords.shape[0]}, chart {self.chart.label()} expects {self.chart.dim}"
            )
        return self

    @property
    def q(self) -> np.ndarray:
        return self.coords[self.chart.q_slice]

    @property
    def p(self) -> np.ndarray:
        return self.coords[self.chart.p_slice]

    @property
    def z(self) -> float:
        return float(self.coords[self.chart.z_index])

    @property
    def t(self) -> float:
        return float(self.coords[self.chart.t_index])

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)


class TangentVector(BaseModel):
    """A vector v ∈ T_xM anchored at its base point."""
    base: Point
    components: np.ndarray

    @field_validator("components", mode="before")
    @classmethod
    def _coerce(cls, value: Any) -> np.ndarray:
        return _as_vector(value)

    @model_validator(mode="after")
    def _check_length(self) -> "TangentVector":
        if self.components.shape[0] != self.base.chart.dim:
            raise ValueError(
                f"components has length {self.components.shape[0]}, expected {self.base.chart.dim}"
            )
        return self

    @property
    def chart(self) -> Chart:
        return self.base.chart

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)


class Covector(BaseModel):
    """A covector α ∈ T*_xM anchored at its base point."""
    base: Point
    components: np.ndarray

    @field_validator("components", mode="before")
    @classmethod
    def _coerce(cls, value: Any) -> np.ndarray:
        return _as_vector(value)

    @model_validator(mode="after")
    def _check_length(self) -> "Covector":
        if self.components.shape[0] != self.base.chart.dim:
            raise ValueError(
                f"components has length {self.components.shape[0]}, expected {self.base.chart.dim}"
            )
        return self

    @property
    def chart(self) -> Chart:
        return self.base.chart

    def __call__(self, v: TangentVector) -> float:
        return float(np.dot(self.components, v.components))

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)


class SubspaceBasis(BaseModel):
    """A linear subspace Δ_x ⊂ T_xM given by independent vectors at one base point.

    Independence is checked by the geometry service, which owns the tolerance;
    use GeometryService.basis() to build validated instances.
    """
    base: Point
    vectors: List[TangentVector] = Field(default_factory=list)

    @property
    def rank(self) -> int:
        return len(self.vectors)

    @property
    def chart(self) -> Chart:
        return self.base.chart

    def matrix(self) -> np.ndarray:
        """Basis vectors as columns, shape (dim, rank)."""
        if not self.vectors:
            return np.zeros((self.base.chart.dim, 0))
        return np.column_stack([v.components for v in self.vectors])

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)


class ClassificationResult(BaseModel):
    """Per-sample verdicts and the aggregate verdict of the submanifold classifier."""
    chart_kind: ChartKind
    per_sample: List[SubmanifoldType] = Field(default_factory=list)
    verdict: SubmanifoldType = SubmanifoldType.NONE

    model_config = ConfigDict(use_enum_values=True)


class CorpusEntry(BaseModel):
    """A built-in submanifold N of a contact chart with its expected verdicts."""
    name: str
    n: int = Field(..., ge=1)
    description: str = ""
    expected: SubmanifoldType = Field(..., description="Verdict on N")
    expected_lifted: SubmanifoldType = Field(..., description="Verdict on N×ℝ in the symplectification")

    model_config = ConfigDict(use_enum_values=True)
