from enum import Enum
from typing import Any, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.core.models.geometry import Chart, ChartKind


class ActionFamily(str, Enum):
    """Supported Lie group actions."""
    LIFTED_TRANSLATION = "lifted_translation"
    LIFTED_ROTATION_SO3 = "lifted_rotation_so3"
    CONTACT_TRANSLATION = "contact_translation"


ABELIAN_FAMILIES = (ActionFamily.LIFTED_TRANSLATION, ActionFamily.CONTACT_TRANSLATION)


def _as_array(value: Any) -> np.ndarray:
    arr = np.array(value, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("all entries must be finite")
    arr.setflags(write=False)
    return arr


class GroupAction(BaseModel):
    """A concrete action family on a chart.

    Translations move q¹..qᵏ; the SO(3) family rotates q and p together on a
    symplectic chart with n = 3.
    """
    family: ActionFamily
    chart: Chart
    k: int = Field(default=1, ge=1, description="Number of translated q-coordinates")

    @model_validator(mode="after")
    def _check_family(self) -> "GroupAction":
        family = ActionFamily(self.family)
        kind = self.chart.kind
        if family == ActionFamily.LIFTED_ROTATION_SO3:
            if kind != ChartKind.SYMPLECTIC or self.chart.n != 3:
                raise ValueError("lifted_rotation_so3 needs a symplectic chart with n = 3")
        elif family == ActionFamily.LIFTED_TRANSLATION and kind != ChartKind.SYMPLECTIC:
            raise ValueError("lifted_translation needs a symplectic chart")
        elif family == ActionFamily.CONTACT_TRANSLATION and kind != ChartKind.CONTACT:
            raise ValueError("contact_translation needs a contact chart")
        if family != ActionFamily.LIFTED_ROTATION_SO3 and self.k > self.chart.n:
            raise ValueError(f"k={self.k} exceeds n={self.chart.n}")
        return self

    @property
    def algebra_dim(self) -> int:
        if ActionFamily(self.family) == ActionFamily.LIFTED_ROTATION_SO3:
            return 3
        return self.k

    @property
    def is_abelian(self) -> bool:
        return ActionFamily(self.family) in ABELIAN_FAMILIES

    def label(self) -> str:
        family = ActionFamily(self.family).value
        if self.is_abelian:
            return f"{family}(k={self.k}) on {self.chart.label()}"
        return f"{family} on {self.chart.label()}"

    model_config = ConfigDict(frozen=True)


class GroupElement(BaseModel):
    """g ∈ G: a translation vector a ∈ ℝᵏ or a rotation matrix O."""
    family: ActionFamily
    data: np.ndarray

    @field_validator("data", mode="before")
    @classmethod
    def _coerce(cls, value: Any) -> np.ndarray:
        return _as_array(value)

    @property
    def is_rotation(self) -> bool:
        return ActionFamily(self.family) == ActionFamily.LIFTED_ROTATION_SO3

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)


class AlgebraElement(BaseModel):
    """ξ ∈ 𝔤 in coordinates: ℝᵏ for translations, ℝ³ (hat map) for so(3)."""
    components: np.ndarray

    @field_validator("components", mode="before")
    @classmethod
    def _coerce(cls, value: Any) -> np.ndarray:
        return _as_array(value).reshape(-1)

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)


class MomentumValue(BaseModel):
    """μ ∈ 𝔤* under the dot-product identification."""
    components: np.ndarray

    @field_validator("components", mode="before")
    @classmethod
    def _coerce(cls, value: Any) -> np.ndarray:
        return _as_array(value).reshape(-1)

    def norm(self) -> float:
        return float(np.linalg.norm(self.components))

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)


class MomentumDissipation(BaseModel):
    """Residual series of J(t) against J(0) (symplectic) or J(0)e^{−∫𝓡(H)dt} (contact)."""
    times: np.ndarray
    residual: np.ndarray
    invariance_residual: float = 0.0
    max_residual: Optional[float] = None

    @model_validator(mode="after")
    def _fill_max(self) -> "MomentumDissipation":
        if self.max_residual is None:
            self.max_residual = float(np.max(self.residual)) if self.residual.size else 0.0
        return self

    model_config = ConfigDict(arbitrary_types_allowed=True)
