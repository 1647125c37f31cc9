from enum import Enum
from typing import Annotated, Any, Callable, List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.core.models.geometry import Chart, Point


class PotentialKind(str, Enum):
    """Potentials U(q) for separable mechanical systems."""
    ZERO = "zero"
    HARMONIC = "harmonic"
    QUARTIC = "quartic"
    DOUBLE_WELL = "double_well"


class RadialKind(str, Enum):
    """Radial profiles U(r) for central potentials."""
    KEPLER = "kepler"
    HARMONIC = "harmonic"
    POWER = "power"


class PotentialSpec(BaseModel):
    """U(q) summed over the selected q-coordinates."""
    kind: PotentialKind = Field(default=PotentialKind.ZERO, description="Potential shape")
    stiffness: float = Field(default=1.0, allow_inf_nan=False, description="Overall strength k")
    indices: Optional[List[int]] = Field(None, description="0-based q indices the potential acts on (all when omitted)")

    model_config = ConfigDict(extra="forbid", use_enum_values=True)


class RadialPotentialSpec(BaseModel):
    """U(r) with r = |q|: kepler −k/r, harmonic k r²/2, power k rᵃ/a."""
    kind: RadialKind = Field(default=RadialKind.KEPLER)
    strength: float = Field(default=1.0, allow_inf_nan=False)
    exponent: float = Field(default=2.0, allow_inf_nan=False, description="Exponent a of the power profile")

    @model_validator(mode="after")
    def _nonzero_power(self) -> "RadialPotentialSpec":
        if self.kind == RadialKind.POWER and self.exponent == 0.0:
            raise ValueError("power profile needs a nonzero exponent (k r^a / a)")
        return self

    model_config = ConfigDict(extra="forbid", use_enum_values=True)


class SeparableMechanical(BaseModel):
    """H = (1/2m) Σ pᵢ² + U(q)."""
    family: Literal["separable_mechanical"] = "separable_mechanical"
    mass: float = Field(default=1.0, gt=0, allow_inf_nan=False)
    potential: PotentialSpec = Field(default_factory=PotentialSpec)

    model_config = ConfigDict(extra="forbid")


class CentralPotential(BaseModel):
    """H = |p|²/2m + U(|q|)."""
    family: Literal["central_potential"] = "central_potential"
    mass: float = Field(default=1.0, gt=0, allow_inf_nan=False)
    radial: RadialPotentialSpec = Field(default_factory=RadialPotentialSpec)

    model_config = ConfigDict(extra="forbid")


class TranslationInvariant(BaseModel):
    """H = |p|²/2m + c·p, a profile over p only (add γz through ContactDamped)."""
    family: Literal["translation_invariant"] = "translation_invariant"
    mass: float = Field(default=1.0, gt=0, allow_inf_nan=False)
    drift: List[float] = Field(default_factory=list, description="Drift vector c (length n, zeros when omitted)")

    model_config = ConfigDict(extra="forbid")


MechanicalHamiltonian = Annotated[
    Union[SeparableMechanical, CentralPotential, TranslationInvariant],
    Field(discriminator="family")
]


class ContactDamped(BaseModel):
    """H = H_cm + γz on a contact chart."""
    family: Literal["contact_damped"] = "contact_damped"
    base: MechanicalHamiltonian = Field(default_factory=SeparableMechanical)
    gamma: float = Field(default=0.0, allow_inf_nan=False, description="Friction parameter")

    model_config = ConfigDict(extra="forbid")


class PolynomialTerm(BaseModel):
    coefficient: float = Field(..., allow_inf_nan=False)
    exponents: List[int] = Field(..., description="One non-negative exponent per chart coordinate")

    model_config = ConfigDict(extra="forbid")


class Polynomial(BaseModel):
    """H = Σ c · Π xⱼ^eⱼ over all chart coordinates."""
    family: Literal["polynomial"] = "polynomial"
    terms: List[PolynomialTerm] = Field(default_factory=list)

    model_config = ConfigDict(extra="forbid")


BuiltinHamiltonian = Annotated[
    Union[SeparableMechanical, CentralPotential, TranslationInvariant, ContactDamped, Polynomial],
    Field(discriminator="family")
]

SUPPORTED_FAMILIES = [
    "separable_mechanical",
    "central_potential",
    "translation_invariant",
    "contact_damped",
    "polynomial",
]


class ScalarField(BaseModel):
    """A function H on a chart, with an optional analytic gradient.

    `function` and `gradient` work on raw coordinate arrays; `evaluate` takes a Point.
    Fields combine by `+` and scalar `*`.
    """
    chart: Chart
    name: str = Field(default="H")
    function: Callable[[np.ndarray], float]
    gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None
    spec: Optional[Any] = Field(None, description="Builtin spec the field was compiled from")

    def value(self, x: np.ndarray) -> float:
        return float(self.function(x))

    def evaluate(self, pt: Point) -> float:
        return self.value(pt.coords)

    def __add__(self, other: "ScalarField") -> "ScalarField":
        if not isinstance(other, ScalarField):
            return NotImplemented
        if other.chart != self.chart:
            raise ValueError(f"cannot add fields on {self.chart.label()} and {other.chart.label()}")
        f, g = self.function, other.function
        gradient = None
        if self.gradient is not None and other.gradient is not None:
            gf, gg = self.gradient, other.gradient
            gradient = lambda x: gf(x) + gg(x)
        return ScalarField(
            chart=self.chart,
            name=f"{self.name} + {other.name}",
            function=lambda x: f(x) + g(x),
            gradient=gradient,
        )

    def __mul__(self, c: float) -> "ScalarField":
        if not isinstance(c, (int, float)):
            return NotImplemented
        f = self.function
        gradient = None
        if self.gradient is not None:
            gf = self.gradient
            gradient = lambda x: c * gf(x)
        return ScalarField(chart=self.chart, name=f"{c}*{self.name}", function=lambda x: c * f(x), gradient=gradient)

    __rmul__ = __mul__

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)
