"""
Scenario files and run reports.

A scenario is a strict JSON document: unknown keys are errors so that a
misspelled physics parameter never falls back to a default silently.
"""
from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.core.models.dynamics import IntegratorConfig
from app.core.models.geometry import Chart, ChartKind
from app.core.models.hamiltonian import BuiltinHamiltonian
from app.core.models.symmetry import ActionFamily


class Command(str, Enum):
    """CLI subcommands."""
    SIMULATE = "simulate"
    INVARIANTS = "invariants"
    REDUCE = "reduce"
    RECONSTRUCT = "reconstruct"
    SYMPLECTIFY = "symplectify"
    COMMUTE = "commute"
    CLASSIFY = "classify"


class CheckDefault(BaseModel):
    tolerance: float
    commands: List[Command]
    description: str = ""


def _check(tolerance: float, commands: List[Command], description: str) -> CheckDefault:
    return CheckDefault(tolerance=tolerance, commands=commands, description=description)


_TRAJECTORY = [Command.SIMULATE, Command.INVARIANTS]

# Default tolerance table; a scenario may override any tolerance per check.
CHECK_DEFAULTS: Dict[str, CheckDefault] = {
    "energy_drift": _check(1e-8, _TRAJECTORY, "max |H(t) − H(0)| for conservative runs"),
    "dissipation_decay": _check(1e-5, _TRAJECTORY, "max |H(t) − H(0)e^{−γt}| / |H(0)| for constant 𝓡(H) = γ"),
    "damped_newton": _check(1e-4, _TRAJECTORY, "q̈ + γq̇ + U'(q)/m along contact_damped runs"),
    "analytic_damped": _check(1e-6, [Command.SIMULATE], "q(t) against the closed-form damped oscillator"),
    "dissipation_law": _check(1e-4, [Command.INVARIANTS], "max |dH/dt + 𝓡(H)H| by central differences"),
    "energy_law": _check(1e-8, [Command.INVARIANTS], "max |dH(X_H) + H ∂H/∂z| at random points"),
    "divergence": _check(1e-5, [Command.INVARIANTS], "max |div X_H + (n+1)∂H/∂z| at random points"),
    "volume": _check(1e-4, [Command.INVARIANTS], "max |det DΦ_t / e^{−(n+1)∫𝓡(H)dt} − 1|"),
    "momentum_condition": _check(1e-6, [Command.INVARIANTS], "momentum-map condition at random points"),
    "equivariance": _check(1e-12, [Command.INVARIANTS], "J(Φ_g x) = Ad*_{g⁻¹}J(x) at random (g, x)"),
    "momentum_dissipation": _check(1e-6, [Command.INVARIANTS], "J(t) against J(0)e^{−∫𝓡(H)dt}"),
    "section_identity": _check(1e-10, [Command.REDUCE], "project ∘ section = id"),
    "reduced_hamiltonian": _check(1e-10, [Command.REDUCE], "H_μ ∘ π = H on the level set"),
    "reeb_projection": _check(1e-10, [Command.REDUCE], "Tπ(𝓡) = 𝓡_μ on contact reductions"),
    "level_set_tangency": _check(1e-9, [Command.REDUCE], "level-set complement = orbit tangent"),
    "level_set_invariance": _check(1e-7, [Command.REDUCE], "max |J(x(t)) − μ| along the full flow"),
    "commutation": _check(1e-5, [Command.REDUCE], "max ‖π(Φ_t x0) − Φ_t^μ(π x0)‖"),
    "reconstruction": _check(1e-4, [Command.RECONSTRUCT], "reconstructed c(t) against the full flow"),
    "lsq_residual": _check(1e-6, [Command.RECONSTRUCT], "least-squares residual of ξ_M(d) = X_H(d) − ḋ"),
    "nondegeneracy": _check(1e-10, [Command.SYMPLECTIFY], "|det Ω − e^{2(n+1)t}| / e^{2(n+1)t}"),
    "closedness": _check(1e-6, [Command.SYMPLECTIFY], "finite-difference dΩ"),
    "exactness": _check(1e-6, [Command.SYMPLECTIFY], "Ω + dα by finite differences"),
    "lifted_complement": _check(1e-9, [Command.SYMPLECTIFY], "(T(N×ℝ))^⊥ = (TN)^{⊥_Λ} × {0}"),
    "lifted_momentum": _check(1e-12, [Command.SYMPLECTIFY], "e^t J(x) against α(ξ_{M×ℝ})"),
    "lifted_invariance": _check(1e-12, [Command.SYMPLECTIFY], "Φ̃*α = α and Φ̃*Ω = Ω"),
    "lift_agreement": _check(0.5, [Command.SYMPLECTIFY, Command.CLASSIFY], "Legendrian/Lagrangian disagreements"),
    "commutativity": _check(1e-12, [Command.COMMUTE], "max |Ω̄(H_*u, H_*v) − Ω̃(u, v)|"),
    "representative_independence": _check(1e-12, [Command.COMMUTE], "Ω̃ across section representatives"),
    "lifted_level_set": _check(1e-12, [Command.COMMUTE], "max |J̃| and |dJ̃·ũ| on the sampled lifted pairs"),
    "classification": _check(0.5, [Command.CLASSIFY], "corpus verdicts differing from the expected ones"),
    "flat_sharp": _check(1e-12, [Command.CLASSIFY], "♯∘♭ = id (contact and symplectic)"),
    "sharp_lambda": _check(1e-10, [Command.CLASSIFY], "ker ♯_Λ = ⟨η⟩ and im ♯_Λ ⊂ ker η"),
    "complement_dimensions": _check(0.5, [Command.CLASSIFY], "complement dimension and ⊥_dη ∩ ker η mismatches on the corpus"),
}


class SystemSpec(BaseModel):
    chart: ChartKind = Field(..., description="symplectic | contact | symplectified")
    n: int = Field(..., ge=0)
    hamiltonian: Optional[BuiltinHamiltonian] = Field(None, description="family + parameters")

    def to_chart(self) -> Chart:
        return Chart(kind=self.chart, n=self.n)

    @model_validator(mode="after")
    def _check_chart(self) -> "SystemSpec":
        self.to_chart()
        return self

    model_config = ConfigDict(extra="forbid")


class ActionSpec(BaseModel):
    family: ActionFamily
    k: int = Field(default=1, ge=1)
    mu: Optional[List[float]] = Field(None, description="Momentum level for reduction (zeros when omitted)")

    model_config = ConfigDict(extra="forbid")


class CheckSpec(BaseModel):
    id: str
    tolerance: Optional[float] = Field(None, gt=0)

    model_config = ConfigDict(extra="forbid")


class OutputSpec(BaseModel):
    csv: Optional[str] = None
    report: Optional[str] = None

    model_config = ConfigDict(extra="forbid")


class Scenario(BaseModel):
    """A validated scenario document."""
    name: Optional[str] = None
    system: SystemSpec
    action: Optional[ActionSpec] = None
    initial_state: Optional[List[float]] = None
    integrator: IntegratorConfig = Field(default_factory=IntegratorConfig)
    checks: List[CheckSpec] = Field(default_factory=list)
    outputs: OutputSpec = Field(default_factory=OutputSpec)
    seed: int = Field(default=42, ge=0, lt=2 ** 64)
    samples: Optional[int] = Field(None, ge=0, description="Sample count for randomized checks")
    submanifolds: Optional[List[str]] = Field(None, description="Corpus entries for classify/symplectify")
    probe_mu: Optional[List[float]] = Field(None, description="Nonzero μ for the commutativity obstruction probe")

    @model_validator(mode="after")
    def _check_scenario(self) -> "Scenario":
        chart = self.system.to_chart()
        if self.initial_state is not None and len(self.initial_state) != chart.dim:
            raise ValueError(
                f"initial_state has length {len(self.initial_state)}, expected {chart.dim} for {chart.label()}"
            )
        unknown = [c.id for c in self.checks if c.id not in CHECK_DEFAULTS]
        if unknown:
            raise ValueError(f"unknown check ids {unknown}; known ids: {sorted(CHECK_DEFAULTS)}")
        return self

    def chart(self) -> Chart:
        return self.system.to_chart()

    def tolerance(self, check_id: str) -> float:
        for c in self.checks:
            if c.id == check_id and c.tolerance is not None:
                return c.tolerance
        return CHECK_DEFAULTS[check_id].tolerance

    model_config = ConfigDict(extra="forbid")


class CheckResult(BaseModel):
    id: str
    residual: float
    tolerance: float
    passed: bool


class Provenance(BaseModel):
    command: Command
    seed: int
    samples: int
    config_hash: str = Field(..., description="SHA-256 of the canonical scenario JSON")
    scenario: Optional[str] = None

    model_config = ConfigDict(use_enum_values=True)


class Report(BaseModel):
    """Per-check results; status is pass iff every check passed."""
    status: str = "pass"
    checks: List[CheckResult] = Field(default_factory=list)
    provenance: Provenance
    results: Dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _status(self) -> "Report":
        self.status = "pass" if all(c.passed for c in self.checks) else "fail"
        return self

    @property
    def passed(self) -> bool:
        return self.status == "pass"
